//! PPG sleep staging: signal preprocessing, augmentation, a small
//! reverse-mode autodiff engine, single- and dual-stream networks, training
//! and evaluation.

pub mod augment;
pub mod autodiff;
pub mod data;
pub mod eval;
pub mod experiment;
pub mod kv;
pub mod model;
pub mod rng;
pub mod sigproc;
pub mod train;
