//! Numerical core of the LMFCA-Net speech-enhancement toolkit.
//!
//! Builds without `std` (heap allocation is required). File formats, the
//! command line and threading live in `lmfca-toolkit`.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod checkpoint;
pub mod dsp;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod kernels;
pub mod loss;
pub mod net;
pub mod optim;
pub mod params;
pub mod pipeline;
pub mod room;
pub mod scalar;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use graph::{Eval, Graph, NodeId, Ops};
pub use params::{Init, ParameterStore};
pub use scalar::Real;
pub use tensor::Tensor;
