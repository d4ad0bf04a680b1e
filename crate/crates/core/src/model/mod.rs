//! Single-stream and dual-stream cross-attention networks.
//!
//! Single: ResConv encoder, temporal windowing, per-epoch dense layer, TCN
//! blocks, per-epoch logits. Dual: two encoders ending at the fusion width,
//! bidirectional cross-attention at encoder resolution, adaptive modality
//! weighting, then the same head.

mod blocks;
mod config;
mod fusion;
mod network;

pub use blocks::{
    receptive_field, temporal_unwindow, temporal_window, Dense, FeatureMap, ResConvBlock, TcnBlock,
};
pub use config::{ModelConfig, Variant, CONFIG_KEYS};
pub use fusion::{AdaptiveWeighting, CrossAttentionBlock, CrossDirection};
pub use network::{argmax_stages, build_model, Model};
