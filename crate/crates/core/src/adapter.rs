//! LoRA adapters and the full-rank per-layer deltas derived from them.

use std::collections::BTreeMap;
use std::path::Path;

use crate::container::{self, Container};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const LORA_A_SUFFIX: &str = ".lora_A";
pub const LORA_B_SUFFIX: &str = ".lora_B";
pub const DELTA_SUFFIX: &str = ".delta";

const META_RANK: &str = "rank";
const META_ALPHA: &str = "alpha";
const META_LABEL: &str = "label";

/// Low-rank factors for one layer: `A` is `[r, d_in]`, `B` is `[d_out, r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoraPair<T> {
    pub a: Tensor<T>,
    pub b: Tensor<T>,
}

impl<T: Scalar> LoraPair<T> {
    pub fn d_in(&self) -> usize {
        self.a.shape()[1]
    }

    pub fn d_out(&self) -> usize {
        self.b.shape()[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoraAdapter<T> {
    layers: BTreeMap<String, LoraPair<T>>,
    rank: usize,
    alpha: f64,
    label: String,
}

impl<T: Scalar> LoraAdapter<T> {
    pub fn new(
        label: impl Into<String>,
        rank: usize,
        alpha: f64,
        layers: BTreeMap<String, LoraPair<T>>,
    ) -> Result<Self> {
        let adapter = Self {
            layers,
            rank,
            alpha,
            label: label.into(),
        };
        adapter.validate()?;
        Ok(adapter)
    }

    fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::Validation("rank must be positive".into()));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::Validation(format!(
                "alpha must be positive and finite, got {}",
                self.alpha
            )));
        }
        if self.layers.is_empty() {
            return Err(Error::Validation("adapter has no layers".into()));
        }
        for (layer, pair) in &self.layers {
            let (ar, _) = pair.a.dims2()?;
            let (_, bc) = pair.b.dims2()?;
            if ar != self.rank || bc != self.rank {
                return Err(Error::Validation(format!(
                    "layer `{layer}`: A is {:?} and B is {:?}, expected rank {}",
                    pair.a.shape(),
                    pair.b.shape(),
                    self.rank
                )));
            }
        }
        Ok(())
    }

    pub fn layers(&self) -> &BTreeMap<String, LoraPair<T>> {
        &self.layers
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `alpha / r`, the factor applied to `B·A`.
    pub fn scale(&self) -> f64 {
        self.alpha / self.rank as f64
    }
}

/// Per-layer full-rank weight updates of one fine-tuned model.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaMap<T> {
    layers: BTreeMap<String, Tensor<T>>,
    label: String,
}

impl<T: Scalar> DeltaMap<T> {
    /// Tensors are renamed to their layer key.
    pub fn new(label: impl Into<String>, layers: BTreeMap<String, Tensor<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Validation("delta map has no layers".into()));
        }
        let layers = layers
            .into_iter()
            .map(|(k, t)| {
                let t = if t.name() == k { t } else { t.renamed(k.clone()) };
                (k, t)
            })
            .collect();
        Ok(Self {
            layers,
            label: label.into(),
        })
    }

    pub fn layers(&self) -> &BTreeMap<String, Tensor<T>> {
        &self.layers
    }

    pub fn layer(&self, name: &str) -> Option<&Tensor<T>> {
        self.layers.get(name)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn num_values(&self) -> usize {
        self.layers.values().map(Tensor::len).sum()
    }

    pub fn map_tensors(&self, f: impl Fn(&Tensor<T>) -> Tensor<T>) -> Self {
        Self {
            layers: self.layers.iter().map(|(k, t)| (k.clone(), f(t))).collect(),
            label: self.label.clone(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> DeltaMap<U> {
        DeltaMap {
            layers: self
                .layers
                .iter()
                .map(|(k, t)| (k.clone(), t.cast()))
                .collect(),
            label: self.label.clone(),
        }
    }

    pub fn max_abs_diff(&self, other: &DeltaMap<T>) -> f64 {
        self.layers
            .iter()
            .map(|(k, t)| match other.layers.get(k) {
                Some(o) if o.shape() == t.shape() => t.max_abs_diff(o),
                _ => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }
}

/// `ΔW = (alpha / r) · B·A` for every layer.
pub fn compute_delta<T: Scalar>(adapter: &LoraAdapter<T>) -> DeltaMap<T> {
    let scale = adapter.scale();
    let layers = adapter
        .layers
        .iter()
        .map(|(name, pair)| {
            let (d_out, r) = (pair.d_out(), adapter.rank);
            let d_in = pair.d_in();
            let a = pair.a.data();
            let b = pair.b.data();
            let mut out = Vec::with_capacity(d_out * d_in);
            let mut row = vec![0.0f64; d_in];
            for i in 0..d_out {
                row.iter_mut().for_each(|x| *x = 0.0);
                for p in 0..r {
                    let bv = b[i * r + p].to_f64_lossless();
                    for (acc, av) in row.iter_mut().zip(&a[p * d_in..(p + 1) * d_in]) {
                        *acc += bv * av.to_f64_lossless();
                    }
                }
                out.extend(row.iter().map(|&x| T::from_f64_rounded(scale * x)));
            }
            let t = Tensor::new(name.clone(), vec![d_out, d_in], out)
                .expect("validated adapter yields consistent shapes");
            (name.clone(), t)
        })
        .collect();
    DeltaMap {
        layers,
        label: adapter.label.clone(),
    }
}

fn format_alpha(alpha: f64) -> String {
    // Display for f64 is the shortest string that parses back to the same value.
    format!("{alpha}")
}

pub fn adapter_to_container(adapter: &LoraAdapter<f32>) -> Result<Container> {
    adapter.validate()?;
    let mut tensors = Vec::with_capacity(adapter.layers.len() * 2);
    for (layer, pair) in &adapter.layers {
        tensors.push(pair.a.clone().renamed(format!("{layer}{LORA_A_SUFFIX}")));
        tensors.push(pair.b.clone().renamed(format!("{layer}{LORA_B_SUFFIX}")));
    }
    let metadata = BTreeMap::from([
        (META_RANK.to_string(), adapter.rank.to_string()),
        (META_ALPHA.to_string(), format_alpha(adapter.alpha)),
        (META_LABEL.to_string(), adapter.label.clone()),
    ]);
    Ok(Container { metadata, tensors })
}

pub fn adapter_from_container(c: Container) -> Result<LoraAdapter<f32>> {
    let rank_str = c
        .metadata
        .get(META_RANK)
        .ok_or_else(|| Error::Format("metadata is missing `rank`".into()))?;
    let rank: usize = rank_str
        .parse()
        .map_err(|_| Error::Format(format!("metadata rank `{rank_str}` is not an integer")))?;
    let alpha_str = c
        .metadata
        .get(META_ALPHA)
        .ok_or_else(|| Error::Format("metadata is missing `alpha`".into()))?;
    let alpha: f64 = alpha_str
        .parse()
        .map_err(|_| Error::Format(format!("metadata alpha `{alpha_str}` is not a number")))?;
    let label = c.metadata.get(META_LABEL).cloned().unwrap_or_default();

    let mut a_parts = BTreeMap::new();
    let mut b_parts = BTreeMap::new();
    for t in c.tensors {
        let name = t.name().to_string();
        if let Some(layer) = name.strip_suffix(LORA_A_SUFFIX) {
            a_parts.insert(layer.to_string(), t.renamed(layer));
        } else if let Some(layer) = name.strip_suffix(LORA_B_SUFFIX) {
            b_parts.insert(layer.to_string(), t.renamed(layer));
        } else {
            return Err(Error::Format(format!(
                "tensor `{name}` is neither `<layer>{LORA_A_SUFFIX}` nor `<layer>{LORA_B_SUFFIX}`"
            )));
        }
    }
    if let Some(layer) = b_parts.keys().find(|k| !a_parts.contains_key(*k)) {
        return Err(Error::Pairing(format!("layer `{layer}` has B but no A")));
    }
    let mut layers = BTreeMap::new();
    for (layer, a) in a_parts {
        let b = b_parts
            .remove(&layer)
            .ok_or_else(|| Error::Pairing(format!("layer `{layer}` has A but no B")))?;
        layers.insert(layer, LoraPair { a, b });
    }
    LoraAdapter::new(label, rank, alpha, layers)
}

pub fn delta_to_container(delta: &DeltaMap<f32>) -> Container {
    Container {
        metadata: BTreeMap::from([(META_LABEL.to_string(), delta.label.clone())]),
        tensors: delta
            .layers
            .iter()
            .map(|(k, t)| t.clone().renamed(format!("{k}{DELTA_SUFFIX}")))
            .collect(),
    }
}

pub fn delta_from_container(c: Container) -> Result<DeltaMap<f32>> {
    let label = c.metadata.get(META_LABEL).cloned().unwrap_or_default();
    let mut layers = BTreeMap::new();
    for t in c.tensors {
        let name = t.name().to_string();
        let layer = name.strip_suffix(DELTA_SUFFIX).ok_or_else(|| {
            Error::Format(format!("tensor `{name}` does not follow `<layer>{DELTA_SUFFIX}`"))
        })?;
        layers.insert(layer.to_string(), t.renamed(layer));
    }
    DeltaMap::new(label, layers)
}

pub fn save_adapter(adapter: &LoraAdapter<f32>, path: &Path) -> Result<()> {
    container::write(&adapter_to_container(adapter)?, path)
}

pub fn load_adapter(path: &Path) -> Result<LoraAdapter<f32>> {
    adapter_from_container(container::read(path)?)
}

pub fn save_delta(delta: &DeltaMap<f32>, path: &Path) -> Result<()> {
    container::write(&delta_to_container(delta), path)
}

pub fn load_delta(path: &Path) -> Result<DeltaMap<f32>> {
    delta_from_container(container::read(path)?)
}

/// Which naming convention a container follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContainerKind {
    Adapter,
    Delta,
}

pub fn detect_kind(c: &Container) -> Option<ContainerKind> {
    let all = |suffixes: &[&str]| {
        !c.tensors.is_empty()
            && c.tensors
                .iter()
                .all(|t| suffixes.iter().any(|s| t.name().ends_with(s)))
    };
    if all(&[DELTA_SUFFIX]) {
        Some(ContainerKind::Delta)
    } else if all(&[LORA_A_SUFFIX, LORA_B_SUFFIX]) {
        Some(ContainerKind::Adapter)
    } else {
        None
    }
}

/// Load either form, computing the delta when given an adapter.
pub fn load_as_delta(path: &Path) -> Result<DeltaMap<f32>> {
    let c = container::read(path)?;
    match detect_kind(&c) {
        Some(ContainerKind::Delta) => delta_from_container(c),
        Some(ContainerKind::Adapter) => Ok(compute_delta(&adapter_from_container(c)?)),
        None => Err(Error::Format(format!(
            "{} holds neither `<layer>{LORA_A_SUFFIX}`/`<layer>{LORA_B_SUFFIX}` pairs nor `<layer>{DELTA_SUFFIX}` tensors",
            path.display()
        ))),
    }
}
