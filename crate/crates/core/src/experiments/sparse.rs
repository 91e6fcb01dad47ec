//! Planted sparse vector recovery: instance generation, sum-of-squares
//! estimators and learned equivariant estimators.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{gaussian_matrix, haar_orthogonal, sym_eigen_sorted};
use crate::models::{CoeffNetSpec, FeatureMode, VecModelOptions, VecToTensorModel};
use crate::nn::Activation;
use crate::tensor::MetricSignature;

/// Accept/reject draws allowed before giving up.
pub const ACCEPT_REJECT_CAP: usize = 100_000;
/// Ridge added to random covariances.
pub const COVARIANCE_RIDGE: f64 = 1e-5;
/// Eigenvalue gaps below this are clamped when differentiating eigenvectors.
pub const MIN_EIGEN_GAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplingScheme {
    AcceptReject,
    BernoulliGaussian,
    CorrectedBernoulliGaussian,
    BernoulliRademacher,
}

impl SamplingScheme {
    pub const ALL: [SamplingScheme; 4] = [
        SamplingScheme::AcceptReject,
        SamplingScheme::BernoulliGaussian,
        SamplingScheme::CorrectedBernoulliGaussian,
        SamplingScheme::BernoulliRademacher,
    ];
}

impl fmt::Display for SamplingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplingScheme::AcceptReject => "ar",
            SamplingScheme::BernoulliGaussian => "bg",
            SamplingScheme::CorrectedBernoulliGaussian => "cbg",
            SamplingScheme::BernoulliRademacher => "br",
        })
    }
}

impl FromStr for SamplingScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ar" | "accept-reject" => Ok(SamplingScheme::AcceptReject),
            "bg" | "bernoulli-gaussian" => Ok(SamplingScheme::BernoulliGaussian),
            "cbg" | "corrected-bernoulli-gaussian" => Ok(SamplingScheme::CorrectedBernoulliGaussian),
            "br" | "bernoulli-rademacher" => Ok(SamplingScheme::BernoulliRademacher),
            _ => Err(Error::Config(format!("unknown sampling scheme '{s}' (expected ar, bg, cbg or br)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CovarianceKind {
    Identity,
    Diagonal,
    Random,
}

impl fmt::Display for CovarianceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CovarianceKind::Identity => "identity",
            CovarianceKind::Diagonal => "diagonal",
            CovarianceKind::Random => "random",
        })
    }
}

impl FromStr for CovarianceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" => Ok(CovarianceKind::Identity),
            "diagonal" => Ok(CovarianceKind::Diagonal),
            "random" => Ok(CovarianceKind::Random),
            _ => Err(Error::Config(format!("unknown covariance '{s}' (expected identity, diagonal or random)"))),
        }
    }
}

/// Noise covariance shared by every instance of one trial.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseCovariance {
    Identity(usize),
    /// Standard deviations per coordinate.
    Diagonal(Vec<f64>),
    /// `Σ = M Mᵀ + ridge·𝕀`.
    Random(DMatrix<f64>),
}

impl NoiseCovariance {
    pub fn sample<R: Rng + ?Sized>(kind: CovarianceKind, n: usize, rng: &mut R) -> Self {
        match kind {
            CovarianceKind::Identity => NoiseCovariance::Identity(n),
            CovarianceKind::Diagonal => NoiseCovariance::Diagonal((0..n).map(|_| rng.random_range(0.5..1.5f64).sqrt()).collect()),
            CovarianceKind::Random => NoiseCovariance::Random(gaussian_matrix(rng, n, n)),
        }
    }

    pub fn kind(&self) -> CovarianceKind {
        match self {
            NoiseCovariance::Identity(_) => CovarianceKind::Identity,
            NoiseCovariance::Diagonal(_) => CovarianceKind::Diagonal,
            NoiseCovariance::Random(_) => CovarianceKind::Random,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            NoiseCovariance::Identity(n) => *n,
            NoiseCovariance::Diagonal(s) => s.len(),
            NoiseCovariance::Random(m) => m.nrows(),
        }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        match self {
            NoiseCovariance::Identity(n) => DMatrix::identity(*n, *n),
            NoiseCovariance::Diagonal(s) => DMatrix::from_diagonal(&DVector::from_iterator(s.len(), s.iter().map(|x| x * x))),
            NoiseCovariance::Random(m) => m * m.transpose() + DMatrix::identity(m.nrows(), m.nrows()) * COVARIANCE_RIDGE,
        }
    }

    /// One draw from `N(0, Σ)`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let n = self.dim();
        let z = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
        match self {
            NoiseCovariance::Identity(_) => z,
            NoiseCovariance::Diagonal(s) => z.component_mul(&DVector::from_column_slice(s)),
            NoiseCovariance::Random(m) => {
                let w = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                m * z + w * COVARIANCE_RIDGE.sqrt()
            }
        }
    }
}

fn check_epsilon(scheme: SamplingScheme, epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidArgument(format!("sparsity must lie in (0, 1], got {epsilon}")));
    }
    if scheme == SamplingScheme::CorrectedBernoulliGaussian && epsilon > 1.0 / 3.0 {
        return Err(Error::InvalidArgument(format!("corrected Bernoulli-Gaussian needs ε ≤ 1/3, got {epsilon}")));
    }
    Ok(())
}

/// Sparse vector before normalization (accept/reject vectors are already unit length).
pub fn sample_sparse_vector<R: Rng + ?Sized>(rng: &mut R, scheme: SamplingScheme, n: usize, epsilon: f64) -> Result<Vec<f64>> {
    check_epsilon(scheme, epsilon)?;
    let en = epsilon * n as f64;
    let normal = |var: f64| Normal::new(0.0, var.sqrt()).map_err(|e| Error::InvalidArgument(e.to_string()));
    match scheme {
        SamplingScheme::AcceptReject => {
            for _ in 0..ACCEPT_REJECT_CAP {
                let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter_mut().for_each(|x| *x /= norm);
                if v.iter().map(|x| x.powi(4)).sum::<f64>() >= 1.0 / en {
                    return Ok(v);
                }
            }
            Err(Error::ResampleCap(ACCEPT_REJECT_CAP))
        }
        SamplingScheme::BernoulliGaussian => {
            let g = normal(1.0 / en)?;
            Ok((0..n).map(|_| if rng.random::<f64>() < epsilon { g.sample(rng) } else { 0.0 }).collect())
        }
        SamplingScheme::CorrectedBernoulliGaussian => {
            let q = ((1.0 - epsilon) * (1.0 - 3.0 * epsilon) / 3.0).sqrt();
            let big = normal((epsilon + q) / en)?;
            let small = normal((1.0 - epsilon - q) / ((1.0 - epsilon) * n as f64))?;
            Ok((0..n).map(|_| if rng.random::<f64>() < epsilon { big.sample(rng) } else { small.sample(rng) }).collect())
        }
        SamplingScheme::BernoulliRademacher => {
            let a = 1.0 / en.sqrt();
            Ok((0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    if u < epsilon / 2.0 {
                        a
                    } else if u < epsilon {
                        -a
                    } else {
                        0.0
                    }
                })
                .collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseVectorInstance {
    /// `n × d`, orthonormal columns.
    pub basis: DMatrix<f64>,
    /// Unit-norm planted vector.
    pub target: DVector<f64>,
    pub scheme: SamplingScheme,
    pub covariance: CovarianceKind,
    pub epsilon: f64,
}

impl SparseVectorInstance {
    /// Rows of the basis packed row-major, the input of every estimator.
    pub fn rows(&self) -> Vec<f64> {
        basis_rows(&self.basis)
    }
}

pub fn basis_rows(basis: &DMatrix<f64>) -> Vec<f64> {
    let (n, d) = basis.shape();
    let mut out = Vec::with_capacity(n * d);
    for i in 0..n {
        out.extend(basis.row(i).iter());
    }
    out
}

pub fn gen_sparse_instance<R: Rng + ?Sized>(
    rng: &mut R,
    scheme: SamplingScheme,
    covariance: &NoiseCovariance,
    d: usize,
    epsilon: f64,
) -> Result<SparseVectorInstance> {
    let n = covariance.dim();
    if d == 0 || d > n {
        return Err(Error::InvalidArgument(format!("need 1 ≤ d ≤ n, got d={d}, n={n}")));
    }
    let mut v = None;
    for _ in 0..ACCEPT_REJECT_CAP {
        let raw = DVector::from_vec(sample_sparse_vector(rng, scheme, n, epsilon)?);
        let norm = raw.norm();
        if norm > 0.0 {
            v = Some(raw / norm);
            break;
        }
    }
    let v = v.ok_or(Error::ResampleCap(ACCEPT_REJECT_CAP))?;
    let mut b = DMatrix::zeros(n, d);
    b.set_column(0, &v);
    for j in 1..d {
        b.set_column(j, &covariance.draw(rng));
    }
    let o = haar_orthogonal(rng, d);
    let basis = (b * o).qr().q();
    Ok(SparseVectorInstance { basis, target: v, scheme, covariance: covariance.kind(), epsilon })
}

fn rows_of(rows: &[f64], d: usize) -> Result<Vec<&[f64]>> {
    if d == 0 || rows.len() % d != 0 {
        return Err(Error::BadLength { expected: d, got: rows.len() });
    }
    Ok(rows.chunks(d).collect())
}

fn weighted_outer_sum(rows: &[&[f64]], d: usize, weight: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(d, d);
    for a in rows {
        let w = weight(a.iter().map(|x| x * x).sum());
        for i in 0..d {
            for j in 0..d {
                h[(i, j)] += w * a[i] * a[j];
            }
        }
    }
    h
}

/// `Σ_i (‖a_i‖² − d/n) a_i a_iᵀ`.
pub fn sos_h_hopkins(rows: &[f64], d: usize) -> Result<DMatrix<f64>> {
    let rs = rows_of(rows, d)?;
    let c = d as f64 / rs.len() as f64;
    Ok(weighted_outer_sum(&rs, d, |s| s - c))
}

/// `Σ_i (‖a_i‖² − (d−1)/n) a_i a_iᵀ − (3/n)𝕀`.
pub fn sos_h_mao(rows: &[f64], d: usize) -> Result<DMatrix<f64>> {
    let rs = rows_of(rows, d)?;
    let n = rs.len() as f64;
    let c = (d as f64 - 1.0) / n;
    Ok(weighted_outer_sum(&rs, d, |s| s - c) - DMatrix::identity(d, d) * (3.0 / n))
}

/// `basis · (top eigenvector of h)`.
pub fn estimate_sparse(basis: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<DVector<f64>> {
    if h.nrows() != basis.ncols() || h.ncols() != basis.ncols() {
        return Err(Error::DimensionMismatch { expected: basis.ncols(), got: h.nrows() });
    }
    let (_, q) = sym_eigen_sorted(&((h + h.transpose()) * 0.5))?;
    Ok(basis * q.column(q.ncols() - 1))
}

/// `⟨v, v̂⟩²`.
pub fn recovery_score(target: &DVector<f64>, estimate: &DVector<f64>) -> f64 {
    target.dot(estimate).powi(2)
}

/// Loss `1 − ⟨v, S u⟩²` for the top eigenvector `u` of `h`, and its gradient
/// with respect to `h` (symmetric).
pub fn recovery_loss_grad(basis: &DMatrix<f64>, target: &DVector<f64>, h: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    let d = h.nrows();
    let (values, q) = sym_eigen_sorted(&((h + h.transpose()) * 0.5))?;
    let top = d - 1;
    let w = basis.transpose() * target;
    let u = q.column(top);
    let c = w.dot(&u);
    let mut g = DMatrix::zeros(d, d);
    for j in 0..top {
        let gap = (values[top] - values[j]).max(MIN_EIGEN_GAP);
        let alpha = -2.0 * c * w.dot(&q.column(j)) / gap;
        g += q.column(j) * u.transpose() * alpha;
    }
    Ok((1.0 - c * c, (&g + g.transpose()) * 0.5))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SparseModelKind {
    /// Every `½(a_i a_jᵀ + a_j a_iᵀ)` and `𝕀`, coefficients from the Gram matrix.
    Full,
    /// `a_i a_iᵀ` and `𝕀`, coefficients from the squared norms.
    Diag,
}

/// Options for a learned `h` on `n` rows in dimension `d`.
pub fn sparse_model_options(kind: SparseModelKind, n: usize, d: usize, hidden: Vec<usize>) -> Result<VecModelOptions> {
    let net = CoeffNetSpec::Dense { hidden, activation: Activation::Relu };
    let mut o = VecModelOptions::new(n, MetricSignature::euclidean(d)?, vec![2], net);
    o.symmetric_output = true;
    o.feature_scale = n as f64 / d as f64;
    if kind == SparseModelKind::Diag {
        o.diagonal_terms_only = true;
        o.features = FeatureMode::Norms;
    }
    Ok(o)
}

/// `h(a_1, …, a_n)` from a learned model.
pub fn learned_h(model: &VecToTensorModel, rows: &[f64]) -> Result<DMatrix<f64>> {
    let d = model.dim();
    let (out, _) = model.forward_batch(&[rows])?;
    Ok(DMatrix::from_row_slice(d, d, &out[0][0]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::terms::Slot;
    use crate::rng::seeded;

    #[test]
    fn rademacher_entries_have_fixed_magnitude() {
        let mut rng = seeded(80);
        let v = sample_sparse_vector(&mut rng, SamplingScheme::BernoulliRademacher, 100, 0.25).unwrap();
        assert!(v.iter().all(|x| *x == 0.0 || (x.abs() - 0.2).abs() < 1e-15));
    }

    #[test]
    fn accept_reject_meets_the_sparsity_bound() {
        let mut rng = seeded(81);
        let v = sample_sparse_vector(&mut rng, SamplingScheme::AcceptReject, 50, 0.25).unwrap();
        assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(v.iter().map(|x| x.powi(4)).sum::<f64>() >= 1.0 / 12.5);
        assert!(sample_sparse_vector(&mut rng, SamplingScheme::CorrectedBernoulliGaussian, 50, 0.4).is_err());
    }

    #[test]
    fn instances_have_orthonormal_bases_containing_the_target() {
        let mut rng = seeded(82);
        for kind in [CovarianceKind::Identity, CovarianceKind::Diagonal, CovarianceKind::Random] {
            let cov = NoiseCovariance::sample(kind, 40, &mut rng);
            for scheme in SamplingScheme::ALL {
                let inst = gen_sparse_instance(&mut rng, scheme, &cov, 4, 0.25).unwrap();
                let s = &inst.basis;
                assert!((s.transpose() * s - DMatrix::identity(4, 4)).abs().max() < 1e-10);
                assert!((inst.target.norm() - 1.0).abs() < 1e-12);
                let residual = &inst.target - s * (s.transpose() * &inst.target);
                assert!(residual.norm() < 1e-9);
            }
        }
    }

    #[test]
    fn random_covariance_draws_match_the_matrix() {
        let mut rng = seeded(83);
        let cov = NoiseCovariance::sample(CovarianceKind::Diagonal, 3, &mut rng);
        let m = cov.matrix();
        assert!(m.diagonal().iter().all(|x| (0.5..1.5).contains(x)));
        let mut acc = DMatrix::zeros(3, 3);
        let draws = 20_000;
        for _ in 0..draws {
            let x = cov.draw(&mut rng);
            acc += &x * x.transpose();
        }
        assert!((acc / draws as f64 - m).abs().max() < 0.05);
    }

    #[test]
    fn sos_estimators_on_trivial_rows() {
        let zeros = vec![0.0; 10 * 3];
        assert_eq!(sos_h_hopkins(&zeros, 3).unwrap(), DMatrix::zeros(3, 3));
        assert_eq!(sos_h_mao(&zeros, 3).unwrap(), DMatrix::identity(3, 3) * -0.3);
        let mut rows = vec![0.0; 10 * 3];
        rows[0] = (0.3f64).sqrt();
        assert!(sos_h_hopkins(&rows, 3).unwrap().abs().max() < 1e-15);
    }

    #[test]
    fn sos_estimators_match_double_loop() {
        let mut rng = seeded(84);
        let (n, d) = (12, 3);
        let rows: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h = sos_h_mao(&rows, d).unwrap();
        for i in 0..d {
            for j in 0..d {
                let mut s = if i == j { -3.0 / n as f64 } else { 0.0 };
                for r in 0..n {
                    let a = &rows[r * d..(r + 1) * d];
                    let norm2: f64 = a.iter().map(|x| x * x).sum();
                    s += (norm2 - (d as f64 - 1.0) / n as f64) * a[i] * a[j];
                }
                assert!((h[(i, j)] - s).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn estimate_uses_the_top_eigenvector() {
        let mut rng = seeded(85);
        let cov = NoiseCovariance::sample(CovarianceKind::Identity, 20, &mut rng);
        let inst = gen_sparse_instance(&mut rng, SamplingScheme::BernoulliGaussian, &cov, 3, 0.25).unwrap();
        let mut h = DMatrix::zeros(3, 3);
        h[(0, 0)] = 1.0;
        let v = estimate_sparse(&inst.basis, &h).unwrap();
        let col = inst.basis.column(0);
        assert!((v.dot(&col).abs() - 1.0).abs() < 1e-12);
        let v = estimate_sparse(&inst.basis, &DMatrix::identity(3, 3)).unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-12);
        assert!((&v - &inst.basis * (inst.basis.transpose() * &v)).norm() < 1e-12);
        assert!((recovery_score(&inst.target, &inst.target) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let mut rng = seeded(86);
        let cov = NoiseCovariance::sample(CovarianceKind::Identity, 15, &mut rng);
        let inst = gen_sparse_instance(&mut rng, SamplingScheme::BernoulliRademacher, &cov, 4, 0.25).unwrap();
        let g0 = gaussian_matrix(&mut rng, 4, 4);
        let h = (&g0 + g0.transpose()) * 0.5;
        let (loss, grad) = recovery_loss_grad(&inst.basis, &inst.target, &h).unwrap();
        let direct = 1.0 - recovery_score(&inst.target, &estimate_sparse(&inst.basis, &h).unwrap());
        assert!((loss - direct).abs() < 1e-12);
        let eps = 1e-6;
        for i in 0..4 {
            for j in 0..=i {
                let mut e = DMatrix::zeros(4, 4);
                e[(i, j)] += 0.5;
                e[(j, i)] += 0.5;
                let f = |s: f64| recovery_loss_grad(&inst.basis, &inst.target, &(&h + &e * s)).unwrap().0;
                let fd = (f(eps) - f(-eps)) / (2.0 * eps);
                let an = (&grad.component_mul(&e)).sum();
                assert!((fd - an).abs() < 1e-6 * (1.0 + an.abs()), "{fd} vs {an}");
            }
        }
    }

    #[test]
    fn hopkins_lies_in_the_full_model_class() {
        let mut rng = seeded(87);
        let (n, d) = (8, 3);
        let opts = sparse_model_options(SparseModelKind::Full, n, d, vec![4]).unwrap();
        let model = VecToTensorModel::new(opts, &mut rng).unwrap();
        let rows: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let head = &model.heads()[0];
        let mut coeffs = vec![0.0; model.num_terms()];
        for (gi, g) in head.groups.iter().enumerate() {
            let layout = g.representative.layout().unwrap();
            if let [Slot::Vector(a), Slot::Vector(b)] = layout[..] {
                if a == b {
                    let norm2: f64 = rows[a * d..(a + 1) * d].iter().map(|x| x * x).sum();
                    coeffs[head.offset + gi] = norm2 - d as f64 / n as f64;
                }
            }
        }
        let h = DMatrix::from_row_slice(d, d, &model.combine_raw(&rows, &coeffs)[0]);
        assert!((h - sos_h_hopkins(&rows, d).unwrap()).abs().max() < 1e-14);
    }

    #[test]
    fn model_sizes() {
        let mut rng = seeded(88);
        let full = VecToTensorModel::new(sparse_model_options(SparseModelKind::Full, 10, 3, vec![8]).unwrap(), &mut rng).unwrap();
        assert_eq!(full.num_terms(), 56);
        let diag = VecToTensorModel::new(sparse_model_options(SparseModelKind::Diag, 10, 3, vec![8]).unwrap(), &mut rng).unwrap();
        assert_eq!(diag.num_terms(), 11);
        assert_eq!(diag.net().input_dim(), 10);
    }
}
