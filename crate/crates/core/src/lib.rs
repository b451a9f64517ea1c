//! Micro-Doppler radar target classification with classical and quantum
//! kernel support vector machines.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod error;
pub mod harness;
pub mod linalg;
pub mod par;
pub mod pca;
pub mod qkernel;
pub mod qsim;
pub mod radar_sim;
pub mod rng;
pub mod spectral_features;
pub mod svm;

pub use error::{Error, Result};
