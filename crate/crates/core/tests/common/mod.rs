//! Shared generators and reference implementations for integration tests.
//!
//! The reference merge here is written entry by entry with full sorts and
//! plain loops, sharing no code with the library's merge path.

#![allow(dead_code)]

use std::collections::BTreeMap;

use lingomerge::{DeltaMap, LoraAdapter, LoraPair, Tensor};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_values(rng: &mut StdRng, n: usize, scale: f32) -> Vec<f32> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

pub fn random_tensor(rng: &mut StdRng, name: &str, shape: Vec<usize>, scale: f32) -> Tensor<f32> {
    let n = shape.iter().product();
    Tensor::new(name, shape, random_values(rng, n, scale)).unwrap()
}

/// Deltas sharing one randomly drawn geometry.
pub fn random_delta_set(rng: &mut StdRng, models: usize, max_layers: usize, max_dim: usize) -> Vec<DeltaMap<f32>> {
    let n_layers = rng.gen_range(1..=max_layers);
    let shapes: Vec<(String, usize, usize)> = (0..n_layers)
        .map(|i| (format!("layers.{i}.proj"), rng.gen_range(1..=max_dim), rng.gen_range(1..=max_dim)))
        .collect();
    (0..models)
        .map(|m| {
            let layers = shapes
                .iter()
                .map(|(name, r, c)| (name.clone(), random_tensor(rng, name, vec![*r, *c], 1.0)))
                .collect::<BTreeMap<_, _>>();
            DeltaMap::new(format!("lang{m}"), layers).unwrap()
        })
        .collect()
}

pub fn random_adapter(rng: &mut StdRng, label: &str, rank: usize, shapes: &[(String, usize, usize)]) -> LoraAdapter<f32> {
    let layers = shapes
        .iter()
        .map(|(name, d_out, d_in)| {
            let a = random_tensor(rng, name, vec![rank, *d_in], 0.5);
            let b = random_tensor(rng, name, vec![*d_out, rank], 0.5);
            (name.clone(), LoraPair { a, b })
        })
        .collect();
    let alpha = [rank as f64, 2.0 * rank as f64, 16.0, 0.5][rng.gen_range(0..4)];
    LoraAdapter::new(label, rank, alpha, layers).unwrap()
}

/// `ceil(num/den · n)` in integers.
pub fn exact_keep(n: usize, num: usize, den: usize) -> usize {
    (num * n).div_ceil(den).max(1)
}

/// Brute-force TIES on flat vectors.
///
/// 1. per model, stable-sort indices by descending magnitude and keep the first `keep`;
/// 2. per entry, sign of the weighted sum of kept values;
/// 3. per entry, weighted mean of kept values carrying that sign.
pub fn reference_ties(inputs: &[Vec<f64>], weights: &[f64], keep: usize) -> Vec<f64> {
    let n = inputs[0].len();
    let trimmed: Vec<Vec<f64>> = inputs
        .iter()
        .map(|v| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| v[b].abs().partial_cmp(&v[a].abs()).unwrap());
            let mut out = vec![0.0; n];
            for &i in idx.iter().take(keep) {
                out[i] = v[i];
            }
            out
        })
        .collect();
    let mut merged = vec![0.0; n];
    for i in 0..n {
        let mut total = 0.0;
        for (m, t) in trimmed.iter().enumerate() {
            total += weights[m] * t[i];
        }
        if total == 0.0 {
            continue;
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for (m, t) in trimmed.iter().enumerate() {
            if t[i] != 0.0 && (t[i] > 0.0) == (total > 0.0) {
                num += weights[m] * t[i];
                den += weights[m];
            }
        }
        if den > 0.0 {
            merged[i] = num / den;
        }
    }
    merged
}

pub fn to_f64(t: &Tensor<f32>) -> Vec<f64> {
    t.data().iter().map(|&v| f64::from(v)).collect()
}

pub fn bits(d: &DeltaMap<f32>) -> Vec<(String, Vec<u32>)> {
    d.layers()
        .iter()
        .map(|(k, t)| (k.clone(), t.data().iter().map(|v| v.to_bits()).collect()))
        .collect()
}

pub fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
