//! Neo-Hookean stress-strain data.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::gaussian_matrix;
use crate::tensor::TensorValue;

/// Deformations with a smaller determinant are redrawn.
pub const MIN_DETERMINANT: f64 = 0.2;
pub const MAX_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct NeoHookeanSample {
    /// Right Cauchy-Green strain `FᵀF`.
    pub strain: TensorValue,
    /// Second Piola-Kirchhoff stress.
    pub stress: TensorValue,
    pub lambda: f64,
    pub mu: f64,
}

/// `S = (½λ log det C − μ) C⁻¹ + μ𝕀` for symmetric positive-definite `C`.
pub fn stress_from_strain(c: &DMatrix<f64>, lambda: f64, mu: f64) -> Result<DMatrix<f64>> {
    let chol = c
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("strain is not positive definite".into()))?;
    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    let inv = chol.inverse();
    let s = inv * (0.5 * lambda * log_det - mu) + DMatrix::identity(c.nrows(), c.ncols()) * mu;
    Ok((&s + s.transpose()) * 0.5)
}

pub fn sample_from_deformation(f: &DMatrix<f64>, lambda: f64, mu: f64) -> Result<NeoHookeanSample> {
    let c = f.transpose() * f;
    let c = (&c + c.transpose()) * 0.5;
    let s = stress_from_strain(&c, lambda, mu)?;
    Ok(NeoHookeanSample { strain: TensorValue::from_matrix(&c)?, stress: TensorValue::from_matrix(&s)?, lambda, mu })
}

/// `F = 𝕀 + η·G` with standard normal `G`, redrawn until `det F > 0.2`.
pub fn gen_neohookean<R: Rng + ?Sized>(rng: &mut R, d: usize, lambda: f64, mu: f64, eta: f64) -> Result<NeoHookeanSample> {
    if lambda <= 0.0 || mu <= 0.0 {
        return Err(Error::InvalidArgument(format!("material constants must be positive, got λ={lambda}, μ={mu}")));
    }
    if !(eta > 0.0 && eta <= 0.5) {
        return Err(Error::InvalidArgument(format!("perturbation scale must lie in (0, 0.5], got {eta}")));
    }
    for _ in 0..MAX_ATTEMPTS {
        let f = DMatrix::identity(d, d) + gaussian_matrix(rng, d, d) * eta;
        if f.determinant() > MIN_DETERMINANT {
            return sample_from_deformation(&f, lambda, mu);
        }
    }
    Err(Error::ResampleCap(MAX_ATTEMPTS))
}
