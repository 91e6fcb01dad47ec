//! Group elements for O(d), O(s, d−s) and Sp(d), with samplers.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{expm, gaussian_matrix, haar_orthogonal};
use crate::tensor::{MetricKind, MetricSignature, Parity, TensorValue};

/// Base membership tolerance, scaled by `(1 + max|g|)²` for large entries.
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    matrix: DMatrix<f64>,
    group: MetricSignature,
    det_sign: i8,
}

/// `max |gᵀ θ g − θ|`.
pub fn verify_membership(matrix: &DMatrix<f64>, metric: &MetricSignature) -> Result<f64> {
    let d = metric.dim();
    if matrix.nrows() != d || matrix.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: matrix.nrows() });
    }
    let theta = metric.matrix();
    Ok((matrix.transpose() * &theta * matrix - theta).abs().max())
}

fn tolerance_for(matrix: &DMatrix<f64>) -> f64 {
    let scale = 1.0 + matrix.abs().max();
    MEMBERSHIP_TOLERANCE * scale * scale
}

impl GroupElement {
    pub fn new(matrix: DMatrix<f64>, group: MetricSignature) -> Result<Self> {
        let residual = verify_membership(&matrix, &group)?;
        let tolerance = tolerance_for(&matrix);
        if !(residual <= tolerance) {
            return Err(Error::NotInGroup { residual, tolerance });
        }
        let det_sign = if group.is_symplectic() || matrix.clone().determinant() > 0.0 { 1 } else { -1 };
        Ok(Self { matrix, group, det_sign })
    }

    pub fn identity(group: MetricSignature) -> Self {
        let d = group.dim();
        Self { matrix: DMatrix::identity(d, d), group, det_sign: 1 }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn group(&self) -> &MetricSignature {
        &self.group
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn det_sign(&self) -> i8 {
        self.det_sign
    }

    /// Character value multiplying the action on a tensor of the given parity.
    pub fn character(&self, parity: Parity) -> f64 {
        match parity {
            Parity::Even => 1.0,
            Parity::Odd => self.det_sign as f64,
        }
    }

    pub fn residual(&self) -> f64 {
        verify_membership(&self.matrix, &self.group).expect("shape fixed at construction")
    }

    pub fn compose(&self, other: &GroupElement) -> Result<GroupElement> {
        if self.group != other.group {
            return Err(Error::InvalidArgument(format!("cannot compose {} with {}", self.group, other.group)));
        }
        Ok(Self {
            matrix: &self.matrix * &other.matrix,
            group: self.group,
            det_sign: self.det_sign * other.det_sign,
        })
    }

    /// `θ⁻¹ gᵀ θ`.
    pub fn inverse(&self) -> GroupElement {
        let theta = self.group.matrix();
        let theta_inv = theta.transpose();
        Self {
            matrix: theta_inv * self.matrix.transpose() * theta,
            group: self.group,
            det_sign: self.det_sign,
        }
    }

    /// Applies `g` to a vector given as plain components.
    pub fn apply_vec(&self, v: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(v)).iter().cloned().collect()
    }
}

/// `M(g)` on every index, times the parity character.
pub fn group_act(g: &GroupElement, a: &TensorValue) -> Result<TensorValue> {
    if g.dim() != a.dim() {
        return Err(Error::DimensionMismatch { expected: g.dim(), got: a.dim() });
    }
    a.act_matrix(&g.matrix, g.character(a.parity()))
}

pub fn sample_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<GroupElement> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    GroupElement::new(haar_orthogonal(rng, d), MetricSignature::euclidean(d)?)
}

/// Pure boost `Λ(β)` in time-first coordinates. Needs `‖β‖ < 1`.
pub fn boost(beta: &[f64; 3]) -> Result<DMatrix<f64>> {
    let b2: f64 = beta.iter().map(|b| b * b).sum();
    if b2 >= 1.0 {
        return Err(Error::InvalidArgument(format!("boost speed {} is not below 1", b2.sqrt())));
    }
    let mut m = DMatrix::identity(4, 4);
    if b2 == 0.0 {
        return Ok(m);
    }
    let gamma = 1.0 / (1.0 - b2).sqrt();
    m[(0, 0)] = gamma;
    for i in 0..3 {
        m[(0, i + 1)] = -gamma * beta[i];
        m[(i + 1, 0)] = -gamma * beta[i];
        for j in 0..3 {
            m[(i + 1, j + 1)] += (gamma - 1.0) * beta[i] * beta[j] / b2;
        }
    }
    Ok(m)
}

/// `T(B) Λ(β) R(Q)` for a time flip `B ∈ {±1}`, boost `β` and spatial `Q ∈ O(3)`.
pub fn lorentz_from_parts(beta: &[f64; 3], spatial: &DMatrix<f64>, time_flip: bool) -> Result<GroupElement> {
    if spatial.nrows() != 3 || spatial.ncols() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: spatial.nrows() });
    }
    let mut rotation = DMatrix::identity(4, 4);
    rotation.view_mut((1, 1), (3, 3)).copy_from(spatial);
    let mut flip = DMatrix::identity(4, 4);
    if time_flip {
        flip[(0, 0)] = -1.0;
    }
    GroupElement::new(flip * boost(beta)? * rotation, MetricSignature::lorentz())
}

/// Standard normal truncated to `[-1/√3, 1/√3]`, by rejection.
fn truncated_boost_component<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let bound = 1.0 / 3f64.sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        if x.abs() <= bound {
            return x;
        }
    }
}

/// Lorentz element in O(1,3) with bounded boost.
pub fn sample_lorentz<R: Rng + ?Sized>(rng: &mut R) -> Result<GroupElement> {
    let beta = [
        truncated_boost_component(rng),
        truncated_boost_component(rng),
        truncated_boost_component(rng),
    ];
    let q = haar_orthogonal(rng, 3);
    let flip = rng.random::<bool>();
    lorentz_from_parts(&beta, &q, flip)
}

/// `exp(J S)` for symmetric `S`.
pub fn symplectic_from_generator(s: &DMatrix<f64>) -> Result<GroupElement> {
    let metric = MetricSignature::symplectic(s.nrows())?;
    if s.nrows() != s.ncols() {
        return Err(Error::DimensionMismatch { expected: s.nrows(), got: s.ncols() });
    }
    let sym = (s + s.transpose()) * 0.5;
    GroupElement::new(expm(&(metric.matrix() * sym)), metric)
}

/// `exp(J S)` with `S` symmetric, entries `N(0, 1/d)`.
pub fn sample_symplectic<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<GroupElement> {
    MetricSignature::symplectic(d)?;
    let normal = Normal::new(0.0, (1.0 / d as f64).sqrt()).expect("positive std");
    let mut s = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let x = normal.sample(rng);
            s[(i, j)] = x;
            s[(j, i)] = x;
        }
    }
    symplectic_from_generator(&s)
}

/// Element of O(s, d−s): `exp(θA)` for antisymmetric `A`, composed with a
/// block-diagonal `O(s) × O(d−s)` element.
pub fn sample_indefinite<R: Rng + ?Sized>(positive: usize, negative: usize, rng: &mut R) -> Result<GroupElement> {
    let metric = MetricSignature::minkowski(positive, negative)?;
    let d = metric.dim();
    let g = gaussian_matrix(rng, d, d) * (0.5 / (d as f64).sqrt());
    let antisym = &g - g.transpose();
    let lie = metric.matrix() * antisym;
    let mut block = DMatrix::zeros(d, d);
    block.view_mut((0, 0), (positive, positive)).copy_from(&haar_orthogonal(rng, positive));
    block.view_mut((positive, positive), (negative, negative)).copy_from(&haar_orthogonal(rng, negative));
    GroupElement::new(expm(&lie) * block, metric)
}

/// Samples from the group preserving `metric`.
pub fn sample_group<R: Rng + ?Sized>(metric: &MetricSignature, rng: &mut R) -> Result<GroupElement> {
    match metric.kind() {
        MetricKind::Euclidean { dim } => sample_orthogonal(dim, rng),
        MetricKind::Minkowski { positive: 1, negative: 3 } => sample_lorentz(rng),
        MetricKind::Minkowski { positive, negative } => sample_indefinite(positive, negative, rng),
        MetricKind::Symplectic { dim } => sample_symplectic(dim, rng),
    }
}
