//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! Every op computes its forward result eagerly and, when any input needs a
//! gradient, records a backward closure. [`Tensor::backward`] walks the graph
//! in reverse topological order and accumulates into trainable leaves.

mod attention;
pub mod checkpoint;
mod gradcheck;
pub mod ops;
mod tensor;

pub use attention::{multi_head_attention, MhaParams};
pub use gradcheck::{grad_check, GradCheckReport, DEFAULT_STEP, DEFAULT_TOL};
pub use tensor::{grad_enabled, no_grad, numel, BackwardCtx, BackwardFn, Parameter, Tensor};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TensorError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("label {label} outside 0..{classes}")]
    Label { label: usize, classes: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("backward needs a one-element loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("contract violation: {0}")]
    Contract(String),
}
