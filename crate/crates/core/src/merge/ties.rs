//! Trim, elect sign, and disjoint merge.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::config::{check_density, MergeConfig};
use crate::adapter::DeltaMap;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Elected per-entry sign, each entry in `{-1, 0, +1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<i8>,
}

/// Number of entries kept out of `n` at `density`: `ceil(density * n)`, at least one.
pub fn keep_count(n: usize, density: f64) -> usize {
    // Shave a relative 1e-12 so that e.g. 0.7 * 10 does not ceil to 8.
    let x = density * n as f64 * (1.0 - 1e-12);
    (x.ceil() as usize).clamp(1, n.max(1))
}

/// Keep the `keep_count` largest-magnitude entries; ties go to the lower flat index.
pub fn trim_tensor<T: Scalar>(t: &Tensor<T>, density: f64) -> Tensor<T> {
    let n = t.len();
    let k = keep_count(n, density);
    if k >= n {
        return t.clone();
    }
    let data = t.data();
    let mags: Vec<f64> = data.iter().map(|v| v.to_f64_lossless().abs()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.select_nth_unstable_by(k - 1, |&a, &b| mags[b].total_cmp(&mags[a]).then(a.cmp(&b)));
    let mut out = vec![T::zero(); n];
    for &i in &order[..k] {
        out[i] = data[i];
    }
    t.with_data(out)
}

pub fn trim<T: Scalar>(delta: &DeltaMap<T>, density: f64) -> Result<DeltaMap<T>> {
    check_density(density)?;
    if density == 1.0 {
        return Ok(delta.clone());
    }
    Ok(delta.map_tensors(|t| trim_tensor(t, density)))
}

fn check_tensors<T: Scalar>(tensors: &[&Tensor<T>], weights: &[f64]) -> Result<()> {
    let Some(first) = tensors.first() else {
        return Err(Error::Parameter("no tensors to merge".into()));
    };
    if tensors.len() != weights.len() {
        return Err(Error::Parameter(format!(
            "{} weights for {} inputs",
            weights.len(),
            tensors.len()
        )));
    }
    if let Some(bad) = tensors.iter().find(|t| t.shape() != first.shape()) {
        return Err(Error::Alignment(format!(
            "tensor `{}` has shape {:?}, expected {:?}",
            bad.name(),
            bad.shape(),
            first.shape()
        )));
    }
    Ok(())
}

fn sign_of(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Sign of the weighted sum across models, per entry.
pub fn elect_sign_tensors<T: Scalar>(tensors: &[&Tensor<T>], weights: &[f64]) -> Result<SignTensor> {
    check_tensors(tensors, weights)?;
    let n = tensors[0].len();
    let data = (0..n)
        .map(|i| {
            let s: f64 = tensors
                .iter()
                .zip(weights)
                .map(|(t, w)| w * t.data()[i].to_f64_lossless())
                .sum();
            sign_of(s)
        })
        .collect();
    Ok(SignTensor {
        name: tensors[0].name().to_string(),
        shape: tensors[0].shape().to_vec(),
        data,
    })
}

/// Weighted mean over the models whose value is nonzero and agrees with the elected sign.
pub fn disjoint_merge_tensors<T: Scalar>(
    tensors: &[&Tensor<T>],
    signs: &SignTensor,
    weights: &[f64],
) -> Result<Tensor<T>> {
    check_tensors(tensors, weights)?;
    if signs.shape != tensors[0].shape() {
        return Err(Error::Alignment(format!(
            "sign tensor `{}` has shape {:?}, inputs have {:?}",
            signs.name,
            signs.shape,
            tensors[0].shape()
        )));
    }
    let out = signs
        .data
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            if s == 0 {
                return T::zero();
            }
            let (mut num, mut den) = (0.0f64, 0.0f64);
            for (t, &w) in tensors.iter().zip(weights) {
                let v = t.data()[i].to_f64_lossless();
                if sign_of(v) == s {
                    num += w * v;
                    den += w;
                }
            }
            if den > 0.0 {
                T::from_f64_rounded(num / den)
            } else {
                T::zero()
            }
        })
        .collect();
    Ok(tensors[0].with_data(out))
}

/// Full TIES on one aligned group of tensors.
pub fn ties_tensors<T: Scalar>(tensors: &[&Tensor<T>], weights: &[f64], density: f64) -> Result<Tensor<T>> {
    check_density(density)?;
    check_tensors(tensors, weights)?;
    let trimmed: Vec<Tensor<T>>;
    let group: Vec<&Tensor<T>> = if density < 1.0 {
        trimmed = tensors.iter().map(|t| trim_tensor(t, density)).collect();
        trimmed.iter().collect()
    } else {
        tensors.to_vec()
    };
    let signs = elect_sign_tensors(&group, weights)?;
    disjoint_merge_tensors(&group, &signs, weights)
}

/// Layer names shared by every input, after checking that the inputs line up.
pub(crate) fn aligned_layers<T: Scalar>(deltas: &[DeltaMap<T>]) -> Result<Vec<String>> {
    let Some(first) = deltas.first() else {
        return Err(Error::Parameter("no inputs to merge".into()));
    };
    for d in &deltas[1..] {
        if d.layers().len() != first.layers().len()
            || d.layers().keys().zip(first.layers().keys()).any(|(a, b)| a != b)
        {
            return Err(Error::Alignment(format!(
                "`{}` and `{}` have different layer sets",
                first.label(),
                d.label()
            )));
        }
        for (name, t) in d.layers() {
            let expect = first.layers()[name].shape();
            if t.shape() != expect {
                return Err(Error::Alignment(format!(
                    "layer `{name}` of `{}` has shape {:?}, `{}` has {:?}",
                    d.label(),
                    t.shape(),
                    first.label(),
                    expect
                )));
            }
        }
    }
    Ok(first.layers().keys().cloned().collect())
}

fn check_weights(weights: &[f64], n: usize) -> Result<()> {
    if weights.len() != n {
        return Err(Error::Parameter(format!("{} weights for {n} inputs", weights.len())));
    }
    if let Some(bad) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::Parameter(format!("weights must be positive, got {bad}")));
    }
    Ok(())
}

/// Run `f` over each layer group in parallel; output keyed by layer name.
pub(crate) fn per_layer<T, U, F>(deltas: &[DeltaMap<T>], layers: &[String], f: F) -> Result<BTreeMap<String, U>>
where
    T: Scalar,
    U: Send,
    F: Fn(&str, &[&Tensor<T>]) -> Result<U> + Sync,
{
    layers
        .par_iter()
        .map(|name| {
            let group: Vec<&Tensor<T>> = deltas.iter().map(|d| &d.layers()[name]).collect();
            f(name, &group).map(|u| (name.clone(), u))
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().collect())
}

pub fn elect_sign<T: Scalar>(trimmed: &[DeltaMap<T>], weights: &[f64]) -> Result<BTreeMap<String, SignTensor>> {
    let layers = aligned_layers(trimmed)?;
    check_weights(weights, trimmed.len())?;
    per_layer(trimmed, &layers, |_, group| elect_sign_tensors(group, weights))
}

pub fn disjoint_merge<T: Scalar>(
    trimmed: &[DeltaMap<T>],
    signs: &BTreeMap<String, SignTensor>,
    weights: &[f64],
) -> Result<DeltaMap<T>> {
    let layers = aligned_layers(trimmed)?;
    check_weights(weights, trimmed.len())?;
    let merged = per_layer(trimmed, &layers, |name, group| {
        let s = signs
            .get(name)
            .ok_or_else(|| Error::Alignment(format!("no elected signs for layer `{name}`")))?;
        disjoint_merge_tensors(group, s, weights)
    })?;
    DeltaMap::new("disjoint-merge", merged)
}

pub fn ties_merge<T: Scalar>(deltas: &[DeltaMap<T>], config: &MergeConfig) -> Result<DeltaMap<T>> {
    if deltas.is_empty() {
        return Err(Error::Parameter("TIES needs at least one input".into()));
    }
    check_density(config.density)?;
    let layers = aligned_layers(deltas)?;
    let weights = config.weights_for(deltas.len())?;
    let merged = per_layer(deltas, &layers, |_, group| ties_tensors(group, &weights, config.density))?;
    DeltaMap::new(config.summary(), merged)
}
