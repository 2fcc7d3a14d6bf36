//! Drop and rescale.
//!
//! Each entry is zeroed with probability `p`; survivors are multiplied by
//! `1 / (1 - p)` so the expected value of every entry is unchanged.
//!
//! Drops are drawn from a counter-based stream keyed by
//! `(seed, model label, tensor name, flat index)`. Models with distinct
//! labels therefore get independent drop masks, and the result does not
//! depend on input order or thread scheduling.

use super::config::check_drop_rate;
use crate::adapter::DeltaMap;
use crate::error::Result;
use crate::rng::CounterRng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub fn dare_prune_tensor<T: Scalar>(t: &Tensor<T>, drop_rate: f64, seed: u64, model: &str) -> Tensor<T> {
    if drop_rate == 0.0 {
        return t.clone();
    }
    let rng = CounterRng::new(seed, &[model, t.name()]);
    let rescale = 1.0 / (1.0 - drop_rate);
    let data = t
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if rng.uniform_at(i as u64) < drop_rate {
                T::zero()
            } else {
                T::from_f64_rounded(v.to_f64_lossless() * rescale)
            }
        })
        .collect();
    t.with_data(data)
}

pub fn dare_prune<T: Scalar>(delta: &DeltaMap<T>, drop_rate: f64, seed: u64) -> Result<DeltaMap<T>> {
    check_drop_rate(drop_rate)?;
    if drop_rate == 0.0 {
        return Ok(delta.clone());
    }
    let label = delta.label().to_string();
    Ok(delta.map_tensors(|t| dare_prune_tensor(t, drop_rate, seed, &label)))
}
