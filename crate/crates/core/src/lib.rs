//! Patch-level lymphoma classification: a small convolutional network
//! trained from scratch, with dataset tooling and set-level voting.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod model;
pub mod ops;
pub mod tensor;

#[cfg(test)]
mod testutil;

pub use dataset::{Diagnosis, PatchRecord, RecordId, Sample};
pub use error::{Error, Result};
pub use eval::{evaluate, ConfusionMatrix, EvaluationReport, ImagePrediction, SetPrediction};
pub use model::{ArchitectureSpec, Network, NetworkParams, Precision, TrainConfig};
pub use tensor::{Scalar, Tensor};
