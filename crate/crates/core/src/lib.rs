//! Merge independently fine-tuned LoRA language adapters into one adapter
//! with TIES, DARE and KnOTS, compare the language vectors they encode, and
//! account for the training time and cost of merging versus retraining.
//!
//! Math is generic over [`Scalar`] (`f32` or `f64`). The on-disk container
//! stores `f32`, and the aliases below name the `f32` forms used by file
//! I/O and the CLI, plus `f64` forms handy for reference computations.

pub mod adapter;
pub mod container;
pub mod cost;
pub mod error;
pub mod lowrank;
pub mod merge;
pub mod metrics;
pub mod rng;
pub mod scalar;
pub mod similarity;
pub mod tensor;

pub use adapter::{
    compute_delta, load_adapter, load_as_delta, load_delta, save_adapter, save_delta, DeltaMap, LoraAdapter,
    LoraPair,
};
pub use error::{Error, ErrorClass, Result};
pub use merge::{merge, MergeConfig, Method, Pipeline};
pub use scalar::Scalar;
pub use similarity::{similarity_matrix, SimilarityMatrix};
pub use tensor::Tensor;

pub type TensorBlock = Tensor<f32>;
pub type Adapter = LoraAdapter<f32>;
pub type Delta = DeltaMap<f32>;

pub type TensorBlock64 = Tensor<f64>;
pub type Adapter64 = LoraAdapter<f64>;
pub type Delta64 = DeltaMap<f64>;
