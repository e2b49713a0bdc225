//! Dataset synthesis, training, evaluation and benchmarking for LMFCA-Net.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod eval;
pub mod manifest;
pub mod synth;
pub mod trainer;
pub mod wav;

pub use config::RunConfig;
pub use error::{Result, ToolkitError};
