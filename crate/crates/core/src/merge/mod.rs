//! TIES, DARE and KnOTS over delta maps, and the pipelines combining them.

pub mod config;
pub mod dare;
pub mod knots;
pub mod svd;
pub mod ties;

pub use config::{Method, MergeConfig, Pipeline};
pub use dare::{dare_prune, dare_prune_tensor};
pub use knots::{knots_merge, knots_transform, knots_transform_layer, KnotsLayer};
pub use ties::{
    disjoint_merge, disjoint_merge_tensors, elect_sign, elect_sign_tensors, keep_count, ties_merge,
    ties_tensors, trim, trim_tensor, SignTensor,
};

use rayon::prelude::*;

use crate::adapter::DeltaMap;
use crate::error::Result;
use crate::scalar::Scalar;

/// Run the configured pipeline.
///
/// DARE, when present, prunes every input independently before the rest of
/// the pipeline. The trim step inside TIES still applies the configured
/// density; at density 1 it keeps everything.
pub fn merge<T: Scalar>(deltas: &[DeltaMap<T>], config: &MergeConfig) -> Result<DeltaMap<T>> {
    let pipeline = config.validate()?;
    let pruned;
    let inputs: &[DeltaMap<T>] = if pipeline.uses_dare() {
        let p = config.drop_rate();
        pruned = deltas
            .par_iter()
            .map(|d| dare_prune(d, p, config.seed))
            .collect::<Result<Vec<_>>>()?;
        &pruned
    } else {
        deltas
    };
    let merged = if pipeline.uses_knots() {
        knots_merge(inputs, config)?
    } else {
        ties_merge(inputs, config)?
    };
    Ok(merged.with_label(config.summary()))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::error::Error;
    use crate::tensor::Tensor;

    fn delta(label: &str, v: Vec<f32>) -> DeltaMap<f32> {
        let t = Tensor::new("w", vec![2, v.len() / 2], v).unwrap();
        DeltaMap::new(label, BTreeMap::from([("w".to_string(), t)])).unwrap()
    }

    #[test]
    fn knots_alone_is_rejected() {
        let cfg = MergeConfig {
            pipeline: vec![Method::Knots],
            ..MergeConfig::new(Pipeline::Ties, 1.0)
        };
        let d = delta("a", vec![1.0, 2.0]);
        assert!(matches!(merge(&[d.clone(), d], &cfg), Err(Error::Parameter(_))));
    }

    #[test]
    fn dare_ties_at_zero_drop_is_ties() {
        let a = delta("a", vec![1.0, -2.0, 0.5, 4.0]);
        let b = delta("b", vec![-1.5, 2.5, 0.25, 3.0]);
        let ties = merge(&[a.clone(), b.clone()], &MergeConfig::new(Pipeline::Ties, 1.0)).unwrap();
        let dare = merge(&[a, b], &MergeConfig::new(Pipeline::DareTies, 1.0)).unwrap();
        assert_eq!(ties.layers(), dare.layers());
    }

    #[test]
    fn output_label_is_config_summary() {
        let a = delta("a", vec![1.0, -2.0]);
        let cfg = MergeConfig::new(Pipeline::Ties, 0.5);
        assert_eq!(merge(&[a], &cfg).unwrap().label(), "TIES density=0.5");
    }
}
