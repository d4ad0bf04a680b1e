//! Recordings, their on-disk format, and a synthetic stage-labelled PPG
//! generator for desk-scale experiments.

mod dataset;
mod format;
mod recording;
mod stage;
mod synth;

use std::path::PathBuf;

pub use dataset::{make_dataset, split_sizes, Dataset, ManifestEntry, Split, SplitRatios};
pub use format::{decode_recording, encode_recording, load_recording, save_recording, FORMAT_VERSION, MAGIC};
pub use recording::{
    epoch_split, Channel, Recording, AUG_CHANNEL, ECG_CHANNEL, EPOCH_SAMPLES, EPOCH_SECS, PPG_CHANNEL,
};
pub use stage::Stage;
pub use synth::{generate_synthetic, SynthConfig};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("format error at byte {offset}: {msg}")]
    Format { offset: usize, msg: String },
    #[error("invalid recording: {0}")]
    Invalid(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape error: {0}")]
    Shape(String),
}
