//! Group-equivariant tensor functions.
//!
//! Dense tensors with parity-aware group actions, isotropic tensor bases,
//! equivariant model parameterizations, and three experiment pipelines
//! (stress-strain, path signatures, sparse vector recovery).

pub mod basis;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod groups;
pub mod linalg;
pub mod models;
pub mod nn;
pub mod perm;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use nalgebra;
pub use groups::{group_act, GroupElement};
pub use perm::Permutation;
pub use tensor::{MetricSignature, Parity, TensorValue};
