//! AdamW optimisation with validation-kappa early stopping.

mod adamw;
mod config;
mod trainer;

pub use adamw::{adamw_step, AdamState};
pub use config::{TrainConfig, TRAIN_KEYS};
pub use trainer::{evaluate_pooled, prepare, train_loop, EpochRecord, Prepared, TrainOutcome, TrainState, Trainer, LOG_HEADER};

use crate::autodiff::checkpoint::CheckpointError;
use crate::autodiff::TensorError;
use crate::eval::EvalError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("non-finite gradient in `{param}` at step {step}")]
    NonFiniteGrad { param: String, step: u64 },
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: u64 },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("writing training log: {0}")]
    Log(#[from] std::io::Error),
}
