//! Deterministic signal processing for the PPG and ECG front ends.

mod iir;
mod normalize;
mod pipeline;
mod resample;
mod signal;

pub use iir::{design_filter, filter_apply, frequency_response, magnitude_db, IirFilterSpec, Sos};
pub use normalize::{clip_outliers, mean_std, zscore, DEGENERATE_STD};
pub use pipeline::{preprocess_ecg, preprocess_ppg, PPG_CLIP_K};
pub use resample::resample;
pub use signal::{Rate, SampledSignal};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SigprocError {
    #[error("invalid filter spec: {0}")]
    InvalidSpec(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid sample rate {num}/{den}")]
    InvalidRate { num: u32, den: u32 },
    #[error("empty signal")]
    Empty,
    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },
}
