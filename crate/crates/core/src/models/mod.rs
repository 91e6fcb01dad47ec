//! Equivariant model parameterizations.

pub mod checkpoint;
pub mod eigen;
pub mod general;
pub mod terms;
pub mod vec_to_tensor;

pub use eigen::{forward_sym_with, EigenEquivariantModel, SpectralMap, SpectrumScaling};
pub use general::{apply_general_basis, enumerate_general_basis, GeneralMap, TensorSpec};
pub use terms::{enumerate_basis_terms, BasisTerm, OutputSymmetry};
pub use vec_to_tensor::{invariant_features, CoeffNet, CoeffNetSpec, FeatureMode, VecModelOptions, VecToTensorModel};
