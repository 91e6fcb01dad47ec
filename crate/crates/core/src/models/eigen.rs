//! Equivariant maps on symmetric matrices through their spectrum:
//! `f(A) = Q f̃(Λ) Qᵀ` with `f̃` permutation equivariant.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{max_asymmetry, sym_eigen_sorted};
use crate::nn::{Activation, PermEquivariantNet};
use crate::tensor::{Parity, TensorValue};

/// Inputs further from symmetric than this are rejected.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// A map on eigenvalue vectors. Must commute with permutations for the
/// matrix map to be well defined.
pub trait SpectralMap {
    fn map_spectrum(&self, eigenvalues: &[f64]) -> Result<Vec<f64>>;
}

impl<F: Fn(&[f64]) -> Vec<f64>> SpectralMap for F {
    fn map_spectrum(&self, eigenvalues: &[f64]) -> Result<Vec<f64>> {
        Ok(self(eigenvalues))
    }
}

fn check_symmetric(a: &TensorValue) -> Result<DMatrix<f64>> {
    let m = a.to_matrix()?;
    let asym = max_asymmetry(&m);
    if asym > SYMMETRY_TOLERANCE * (1.0 + m.abs().max()) {
        return Err(Error::NotSymmetric(asym));
    }
    Ok((&m + m.transpose()) * 0.5)
}

/// `Q diag(values) Qᵀ`, symmetrized.
pub fn reconstruct(q: &DMatrix<f64>, values: &[f64]) -> DMatrix<f64> {
    let m = q * DMatrix::from_diagonal(&DVector::from_column_slice(values)) * q.transpose();
    (&m + m.transpose()) * 0.5
}

/// Applies `map` to the spectrum of the symmetric matrix `a`.
pub fn forward_sym_with<M: SpectralMap + ?Sized>(map: &M, a: &TensorValue) -> Result<TensorValue> {
    let m = check_symmetric(a)?;
    let (values, q) = sym_eigen_sorted(&m)?;
    let out = map.map_spectrum(values.as_slice())?;
    if out.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: values.len(), got: out.len() });
    }
    TensorValue::from_matrix(&reconstruct(&q, &out)).map(|t| t.with_parity(Parity::Even))
}

/// Affine standardization applied to every eigenvalue alike.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumScaling {
    pub input_mean: f64,
    pub input_std: f64,
    pub output_mean: f64,
    pub output_std: f64,
}

impl Default for SpectrumScaling {
    fn default() -> Self {
        Self { input_mean: 0.0, input_std: 1.0, output_mean: 0.0, output_std: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenEquivariantModel {
    dim: usize,
    net: PermEquivariantNet,
    pub scaling: SpectrumScaling,
}

/// Per-sample values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct EigenCache {
    q: DMatrix<f64>,
    net: crate::nn::PermCache,
}

impl EigenEquivariantModel {
    /// Single-channel net with the given hidden widths.
    pub fn new<R: Rng + ?Sized>(dim: usize, hidden: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        let mut channels = vec![1];
        channels.extend(hidden);
        channels.push(1);
        Ok(Self { dim, net: PermEquivariantNet::new(&channels, activation, rng)?, scaling: SpectrumScaling::default() })
    }

    pub fn from_net(dim: usize, net: PermEquivariantNet, scaling: SpectrumScaling) -> Result<Self> {
        if net.channels()[0] != 1 || *net.channels().last().unwrap() != 1 {
            return Err(Error::InvalidArgument("spectral network must map one channel to one channel".into()));
        }
        Ok(Self { dim, net, scaling })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn net(&self) -> &PermEquivariantNet {
        &self.net
    }

    pub fn num_params(&self) -> usize {
        self.net.num_params()
    }

    pub fn params(&self) -> &[f64] {
        self.net.params()
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        self.net.params_mut()
    }

    pub fn forward_sym(&self, a: &TensorValue) -> Result<TensorValue> {
        if a.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: a.dim() });
        }
        forward_sym_with(self, a)
    }

    /// Forward pass on a plain matrix, keeping what the backward pass needs.
    pub fn forward_train(&self, a: &DMatrix<f64>) -> Result<(DMatrix<f64>, EigenCache)> {
        let (values, q) = sym_eigen_sorted(a)?;
        let s = self.scaling;
        let x = DMatrix::from_iterator(values.len(), 1, values.iter().map(|v| (v - s.input_mean) / s.input_std));
        let (y, net_cache) = self.net.forward_set(&x)?;
        let out: Vec<f64> = y.iter().map(|v| v * s.output_std + s.output_mean).collect();
        Ok((reconstruct(&q, &out), EigenCache { q, net: net_cache }))
    }

    /// Parameter gradient for an output gradient `g`: `dL/dy_i = q_iᵀ g q_i`.
    pub fn backward_train(&self, cache: &EigenCache, g: &DMatrix<f64>) -> Result<Vec<f64>> {
        let n = cache.q.ncols();
        let sym = (g + g.transpose()) * 0.5;
        let dy = DMatrix::from_fn(n, 1, |i, _| {
            let qi = cache.q.column(i);
            (qi.transpose() * &sym * qi)[(0, 0)] * self.scaling.output_std
        });
        Ok(self.net.backward_set(&cache.net, &dy)?.0)
    }
}

impl SpectralMap for EigenEquivariantModel {
    fn map_spectrum(&self, eigenvalues: &[f64]) -> Result<Vec<f64>> {
        let s = self.scaling;
        let x: Vec<f64> = eigenvalues.iter().map(|v| (v - s.input_mean) / s.input_std).collect();
        Ok(self.net.forward_vec(&x)?.into_iter().map(|v| v * s.output_std + s.output_mean).collect())
    }
}
