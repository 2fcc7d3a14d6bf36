//! SVD alignment of per-model deltas before merging.
//!
//! For each layer the `M` deltas (each `d_out × d_in`) are concatenated
//! side by side into `C = [ΔW_1 | … | ΔW_M]` and factored as
//! `C = U · diag(S) · Vᵀ`. `U` is a basis shared by all models; the column
//! blocks of `diag(S) · Vᵀ` are the per-model coordinates in that basis.
//! The inner merge runs on those coordinates and the result is mapped back
//! through `U`.

use std::collections::BTreeMap;

use super::config::MergeConfig;
use super::svd::thin_svd;
use super::ties::{aligned_layers, per_layer, ties_tensors};
use crate::adapter::DeltaMap;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct KnotsLayer<T> {
    /// Shared left basis, `d_out × k`.
    pub u: Tensor<T>,
    /// Non-increasing, length `k = min(d_out, M·d_in)`.
    pub singular_values: Vec<f64>,
    /// Per-model `diag(S)·V_mᵀ`, each `k × d_in`, in input order.
    pub scaled_v: Vec<Tensor<T>>,
}

impl<T: Scalar> KnotsLayer<T> {
    /// `U · [scaled V_1 | … | scaled V_M]`, the reconstructed concatenation.
    pub fn reconstruct_concat(&self) -> Result<Tensor<T>> {
        let k = self.singular_values.len();
        let d_in = self.scaled_v[0].shape()[1];
        let m = self.scaled_v.len();
        let mut cat = Vec::with_capacity(k * m * d_in);
        for row in 0..k {
            for part in &self.scaled_v {
                cat.extend_from_slice(&part.data()[row * d_in..(row + 1) * d_in]);
            }
        }
        let cat = Tensor::new("concat", vec![k, m * d_in], cat)?;
        self.u.matmul(&cat, self.u.name())
    }

    /// Map a merged coordinate block `k × d_in` back to a `d_out × d_in` delta.
    pub fn reconstruct(&self, merged: &Tensor<T>) -> Result<Tensor<T>> {
        self.u.matmul(merged, self.u.name())
    }
}

pub fn knots_transform_layer<T: Scalar>(group: &[&Tensor<T>]) -> Result<KnotsLayer<T>> {
    if group.len() < 2 {
        return Err(Error::Parameter(format!(
            "KnOTS needs at least 2 inputs, got {}",
            group.len()
        )));
    }
    let name = group[0].name().to_string();
    let (d_out, d_in) = group[0].dims2()?;
    for t in group {
        if t.dims2()? != (d_out, d_in) {
            return Err(Error::Alignment(format!(
                "layer `{name}` shapes differ: {:?} vs {:?}",
                t.shape(),
                group[0].shape()
            )));
        }
    }
    let m = group.len();
    let width = m * d_in;
    let mut concat = Vec::with_capacity(d_out * width);
    for i in 0..d_out {
        for t in group {
            concat.extend(t.data()[i * d_in..(i + 1) * d_in].iter().map(|v| v.to_f64_lossless()));
        }
    }
    let svd = thin_svd(&concat, d_out, width)?;
    let k = svd.k();

    let u = Tensor::new(
        name.clone(),
        vec![d_out, k],
        svd.u.iter().map(|&x| T::from_f64_rounded(x)).collect(),
    )?;
    let scaled_v = (0..m)
        .map(|part| {
            let mut block = Vec::with_capacity(k * d_in);
            for row in 0..k {
                let s = svd.s[row];
                let start = row * width + part * d_in;
                block.extend(svd.vt[start..start + d_in].iter().map(|&x| T::from_f64_rounded(s * x)));
            }
            Tensor::new(format!("{name}.v{part}"), vec![k, d_in], block)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KnotsLayer {
        u,
        singular_values: svd.s,
        scaled_v,
    })
}

pub fn knots_transform<T: Scalar>(deltas: &[DeltaMap<T>]) -> Result<BTreeMap<String, KnotsLayer<T>>> {
    if deltas.len() < 2 {
        return Err(Error::Parameter(format!(
            "KnOTS needs at least 2 inputs, got {}",
            deltas.len()
        )));
    }
    let layers = aligned_layers(deltas)?;
    per_layer(deltas, &layers, |_, group| knots_transform_layer(group))
}

/// Align with [`knots_transform`], TIES-merge the per-model coordinates with
/// the config's density and weights, then reconstruct.
pub fn knots_merge<T: Scalar>(deltas: &[DeltaMap<T>], config: &MergeConfig) -> Result<DeltaMap<T>> {
    if deltas.len() < 2 {
        return Err(Error::Parameter(format!(
            "KnOTS needs at least 2 inputs, got {}",
            deltas.len()
        )));
    }
    let layers = aligned_layers(deltas)?;
    let weights = config.weights_for(deltas.len())?;
    let merged = per_layer(deltas, &layers, |name, group| {
        let aligned = knots_transform_layer(group)?;
        let parts: Vec<&Tensor<T>> = aligned.scaled_v.iter().collect();
        let merged = ties_tensors(&parts, &weights, config.density)?;
        Ok(aligned.reconstruct(&merged)?.renamed(name))
    })?;
    DeltaMap::new(config.summary(), merged)
}
