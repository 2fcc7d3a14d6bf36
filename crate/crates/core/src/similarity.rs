//! Cosine similarity between language vectors.

use std::io::Write;

use rayon::prelude::*;

use crate::adapter::DeltaMap;
use crate::error::{Error, Result};
use crate::merge::ties::aligned_layers;
use crate::scalar::Scalar;

/// All layers concatenated in layer-name order, each row-major.
pub fn flatten<T: Scalar>(delta: &DeltaMap<T>) -> Vec<T> {
    let mut out = Vec::with_capacity(delta.num_values());
    for t in delta.layers().values() {
        out.extend_from_slice(t.data());
    }
    out
}

pub fn cosine<T: Scalar>(u: &[T], v: &[T]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Alignment(format!(
            "vectors have lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    let (mut uv, mut uu, mut vv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a.to_f64_lossless(), b.to_f64_lossless());
        uv += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return Err(Error::UndefinedSimilarity(
            "cosine similarity with a zero vector".into(),
        ));
    }
    Ok((uv / (uu.sqrt() * vv.sqrt())).clamp(-1.0, 1.0))
}

/// How each pair of deltas is compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SimilarityMode {
    /// One cosine over the fully flattened vectors.
    #[default]
    Flattened,
    /// Cosine per layer, then the unweighted mean over layers.
    LayerMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl SimilarityMatrix {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    /// Header row of labels after an empty corner cell, then one
    /// label-prefixed row per input; values fixed at 6 decimals.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Format(format!("csv: {e}"));
        let mut header = vec![String::new()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for (label, row) in self.labels.iter().zip(&self.values) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(|v| format!("{v:.6}")));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Format(format!("csv: {e}")))?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }
}

pub fn similarity_matrix<T: Scalar>(deltas: &[DeltaMap<T>]) -> Result<SimilarityMatrix> {
    similarity_matrix_with(deltas, SimilarityMode::Flattened)
}

pub fn similarity_matrix_with<T: Scalar>(deltas: &[DeltaMap<T>], mode: SimilarityMode) -> Result<SimilarityMatrix> {
    if deltas.len() < 2 {
        return Err(Error::Parameter(format!(
            "need at least 2 deltas to compare, got {}",
            deltas.len()
        )));
    }
    aligned_layers(deltas)?;
    let n = deltas.len();
    let flat: Vec<Vec<T>> = match mode {
        SimilarityMode::Flattened => deltas.iter().map(flatten).collect(),
        SimilarityMode::LayerMean => Vec::new(),
    };
    let pair = |i: usize, j: usize| -> Result<f64> {
        match mode {
            SimilarityMode::Flattened => cosine(&flat[i], &flat[j]),
            SimilarityMode::LayerMean => {
                let (a, b) = (&deltas[i], &deltas[j]);
                let mut sum = 0.0;
                for (name, t) in a.layers() {
                    sum += cosine(t.data(), b.layers()[name].data()).map_err(|_| {
                        Error::UndefinedSimilarity(format!(
                            "layer `{name}` is all zeros in `{}` or `{}`",
                            a.label(),
                            b.label()
                        ))
                    })?;
                }
                Ok(sum / a.layers().len() as f64)
            }
        }
    };
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let sims = pairs
        .par_iter()
        .map(|&(i, j)| pair(i, j).map_err(|e| relabel(e, deltas, i, j)))
        .collect::<Result<Vec<f64>>>()?;
    let mut values = vec![vec![0.0; n]; n];
    for (&(i, j), s) in pairs.iter().zip(sims) {
        values[i][j] = s;
        values[j][i] = s;
    }
    Ok(SimilarityMatrix {
        labels: deltas.iter().map(|d| d.label().to_string()).collect(),
        values,
    })
}

fn relabel<T: Scalar>(e: Error, deltas: &[DeltaMap<T>], i: usize, j: usize) -> Error {
    match e {
        Error::UndefinedSimilarity(msg) => Error::UndefinedSimilarity(format!(
            "`{}` vs `{}`: {msg}",
            deltas[i].label(),
            deltas[j].label()
        )),
        other => other,
    }
}
