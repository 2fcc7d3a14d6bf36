//! Turn a delta map back into a LoRA adapter by truncated SVD.

use std::collections::BTreeMap;

use crate::adapter::{DeltaMap, LoraAdapter, LoraPair};
use crate::error::{Error, Result};
use crate::merge::svd::thin_svd;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Best rank-`rank` approximation of every layer, split as
/// `B = U·√S`, `A = √S·Vᵀ` with `alpha = rank` so the LoRA scale is 1.
pub fn refactor_to_adapter<T: Scalar>(delta: &DeltaMap<T>, rank: usize) -> Result<LoraAdapter<T>> {
    if rank == 0 {
        return Err(Error::Parameter("refactor rank must be positive".into()));
    }
    let mut layers = BTreeMap::new();
    for (name, t) in delta.layers() {
        let (d_out, d_in) = t.dims2()?;
        if rank > d_out.min(d_in) {
            return Err(Error::Parameter(format!(
                "rank {rank} exceeds min dimension of layer `{name}` ({d_out}x{d_in})"
            )));
        }
        let data: Vec<f64> = t.data().iter().map(|v| v.to_f64_lossless()).collect();
        let svd = thin_svd(&data, d_out, d_in)?;
        let k = svd.k();
        let root: Vec<f64> = svd.s[..rank].iter().map(|s| s.sqrt()).collect();
        let mut b = Vec::with_capacity(d_out * rank);
        for i in 0..d_out {
            b.extend((0..rank).map(|p| T::from_f64_rounded(svd.u[i * k + p] * root[p])));
        }
        let mut a = Vec::with_capacity(rank * d_in);
        for (p, r) in root.iter().enumerate() {
            a.extend(svd.vt[p * d_in..(p + 1) * d_in].iter().map(|&x| T::from_f64_rounded(r * x)));
        }
        layers.insert(
            name.clone(),
            LoraPair {
                a: Tensor::new(name.clone(), vec![rank, d_in], a)?,
                b: Tensor::new(name.clone(), vec![d_out, rank], b)?,
            },
        );
    }
    LoraAdapter::new(delta.label(), rank, rank as f64, layers)
}
