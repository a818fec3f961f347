//! Training engine for a one-hidden-layer sigmoid network predicting glycemic
//! control from joint-mobility and anthropometric measurements.
//!
//! The crate is organised bottom-up:
//!
//! - [`dataset`]: the 27-column participant CSV schema, derived ratios, HbA1c
//!   labelling, sex partitioning, stratified splitting, min-max scaling and a
//!   seeded synthesizer.
//! - [`network`]: flat `f32` weight storage, forward pass, per-instance
//!   backpropagation and the `glycemlp-net-v1` checkpoint format.
//! - [`backend`]: the sequential and neuron-parallel layer executors. Both run
//!   the same per-neuron kernels, so their results are bit-identical.
//! - [`trainer`]: online SGD with in-flight accuracy checkpoints.
//! - [`bench`]: wall-clock comparison of the two backends.

pub mod backend;
pub mod bench;
pub mod dataset;
mod error;
pub mod network;
pub mod trainer;

pub use backend::{Backend, BackendKind};
pub use dataset::{Dataset, Label, ParticipantRecord, Sex, SplitPair, SubsetTag};
pub use error::{Error, Result};
pub use network::{Network, NetworkConfig};
pub use trainer::{TrainReport, TrainSpec};
