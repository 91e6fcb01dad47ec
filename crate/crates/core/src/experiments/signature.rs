//! Truncated path signatures: exact piecewise-linear oracle, the discrete
//! iterated-sum baseline, and polynomial path generation.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Parity, TensorValue};

/// Points used to compute the target signature of a generated path.
pub const ORACLE_POINTS: usize = 1000;

/// Levels `0..=m` of a truncated tensor series, level `k` flat with `d^k` entries.
type Series = Vec<Vec<f64>>;

fn outer_flat(a: &[f64], b: &[f64], out: &mut [f64], scale: f64) {
    let nb = b.len();
    for (i, x) in a.iter().enumerate() {
        let s = x * scale;
        if s == 0.0 {
            continue;
        }
        for (o, y) in out[i * nb..(i + 1) * nb].iter_mut().zip(b) {
            *o += s * y;
        }
    }
}

fn unit_series(d: usize, m: usize) -> Series {
    (0..=m).map(|k| if k == 0 { vec![1.0] } else { vec![0.0; d.pow(k as u32)] }).collect()
}

/// `exp_⊗(delta)` truncated at level `m`.
fn tensor_exp(delta: &[f64], m: usize) -> Series {
    let mut out = vec![vec![1.0]];
    for k in 1..=m {
        let mut next = vec![0.0; out[k - 1].len() * delta.len()];
        outer_flat(&out[k - 1], delta, &mut next, 1.0 / k as f64);
        out.push(next);
    }
    out
}

/// `a ← a ⊗ exp(delta)`, updating high levels first.
fn append_segment(a: &mut Series, delta: &[f64]) {
    let m = a.len() - 1;
    let e = tensor_exp(delta, m);
    for k in (1..=m).rev() {
        let mut acc = std::mem::take(&mut a[k]);
        for i in 0..k {
            outer_flat(&a[i], &e[k - i], &mut acc, 1.0);
        }
        a[k] = acc;
    }
}

fn series_product(a: &Series, b: &Series) -> Series {
    let m = a.len() - 1;
    let mut out: Series = Vec::with_capacity(m + 1);
    for k in 0..=m {
        let mut acc = vec![0.0; a[k].len()];
        for i in 0..=k {
            outer_flat(&a[i], &b[k - i], &mut acc, 1.0);
        }
        out.push(acc);
    }
    out
}

fn to_tensors(d: usize, s: Series) -> Result<Vec<TensorValue>> {
    s.into_iter()
        .enumerate()
        .skip(1)
        .map(|(k, data)| TensorValue::new(d, k, Parity::Even, data))
        .collect()
}

fn from_tensors(levels: &[TensorValue]) -> Result<(usize, Series)> {
    let d = levels.first().map(|t| t.dim()).ok_or_else(|| Error::InvalidArgument("empty signature".into()))?;
    let mut s = vec![vec![1.0]];
    for (k, t) in levels.iter().enumerate() {
        if t.order() != k + 1 || t.dim() != d {
            return Err(Error::OrderMismatch { expected: k + 1, got: t.order() });
        }
        s.push(t.components().to_vec());
    }
    Ok((d, s))
}

fn check_points(points: &[TensorValue], m: usize) -> Result<usize> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument(format!("a path needs at least 2 points, got {}", points.len())));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("truncation level must be at least 1".into()));
    }
    let d = points[0].dim();
    for p in points {
        if p.order() != 1 {
            return Err(Error::OrderMismatch { expected: 1, got: p.order() });
        }
        if p.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: p.dim() });
        }
    }
    Ok(d)
}

fn increments(points: &[TensorValue]) -> impl Iterator<Item = Vec<f64>> + '_ {
    points.windows(2).map(|w| w[1].components().iter().zip(w[0].components()).map(|(b, a)| b - a).collect())
}

/// Levels `1..=m` of the signature of the piecewise-linear path through `points`.
pub fn signature_oracle(points: &[TensorValue], m: usize) -> Result<Vec<TensorValue>> {
    let d = check_points(points, m)?;
    let mut s = unit_series(d, m);
    for delta in increments(points) {
        append_segment(&mut s, &delta);
    }
    to_tensors(d, s)
}

/// Graded tensor-algebra product of two truncated signatures (levels from 1).
pub fn chen_product(a: &[TensorValue], b: &[TensorValue]) -> Result<Vec<TensorValue>> {
    if a.len() != b.len() {
        return Err(Error::BadLength { expected: a.len(), got: b.len() });
    }
    let (d, sa) = from_tensors(a)?;
    let (db, sb) = from_tensors(b)?;
    if d != db {
        return Err(Error::DimensionMismatch { expected: d, got: db });
    }
    to_tensors(d, series_product(&sa, &sb))
}

/// `Σ_{t_1<…<t_k} Δx_{t_1} ⊗ … ⊗ Δx_{t_k}` over consecutive increments.
pub fn discrete_signature_baseline(points: &[TensorValue], m: usize) -> Result<Vec<TensorValue>> {
    let d = check_points(points, m)?;
    let mut s = unit_series(d, m);
    for delta in increments(points) {
        for k in (1..=m).rev() {
            let mut acc = std::mem::take(&mut s[k]);
            outer_flat(&s[k - 1], &delta, &mut acc, 1.0);
            s[k] = acc;
        }
    }
    to_tensors(d, s)
}

/// `(1/M) Σ_k d^{-k} ‖truth_k − pred_k‖²`.
pub fn signature_loss(truth: &[TensorValue], pred: &[TensorValue]) -> Result<f64> {
    if truth.len() != pred.len() || truth.is_empty() {
        return Err(Error::BadLength { expected: truth.len(), got: pred.len() });
    }
    let mut total = 0.0;
    for (k, (t, p)) in truth.iter().zip(pred).enumerate() {
        let d = t.dim() as f64;
        total += t.distance(p)?.powi(2) / d.powi(k as i32 + 1);
    }
    Ok(total / truth.len() as f64)
}

/// Polynomial path with `d` coordinates, sampled points and target signature.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub degree: usize,
    /// Row `i` holds the coefficients of coordinate `i`, constant term first.
    pub coefficients: Vec<f64>,
    pub points: Vec<TensorValue>,
    pub signature: Vec<TensorValue>,
}

/// Position at parameter `u` of a path with packed coefficients.
pub fn eval_poly_path(coefficients: &[f64], d: usize, degree: usize, u: f64) -> Vec<f64> {
    (0..d)
        .map(|i| coefficients[i * (degree + 1)..(i + 1) * (degree + 1)].iter().rev().fold(0.0, |acc, c| acc * u + c))
        .collect()
}

/// `count` evenly spaced parameters on `[-1, 1]`.
pub fn evenly_spaced(count: usize) -> Vec<f64> {
    (0..count).map(|i| -1.0 + 2.0 * i as f64 / (count - 1) as f64).collect()
}

/// Random polynomial path with coefficients uniform in `[-1, 1]`.
pub fn gen_poly_path<R: Rng + ?Sized>(rng: &mut R, d: usize, degree: usize, points: usize, levels: usize) -> Result<PathSample> {
    if degree == 0 || points < 2 {
        return Err(Error::InvalidArgument(format!("need degree ≥ 1 and ≥ 2 points, got {degree} and {points}")));
    }
    let coefficients: Vec<f64> = (0..d * (degree + 1)).map(|_| rng.random_range(-1.0..=1.0)).collect();
    path_from_coefficients(coefficients, d, degree, points, levels)
}

pub fn path_from_coefficients(coefficients: Vec<f64>, d: usize, degree: usize, points: usize, levels: usize) -> Result<PathSample> {
    if coefficients.len() != d * (degree + 1) {
        return Err(Error::BadLength { expected: d * (degree + 1), got: coefficients.len() });
    }
    let sample = |us: Vec<f64>| -> Result<Vec<TensorValue>> {
        us.into_iter().map(|u| TensorValue::vector(&eval_poly_path(&coefficients, d, degree, u))).collect()
    };
    let fine = sample(evenly_spaced(ORACLE_POINTS))?;
    let signature = signature_oracle(&fine, levels)?;
    let points = sample(evenly_spaced(points))?;
    Ok(PathSample { degree, coefficients, points, signature })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn vecs(rows: &[&[f64]]) -> Vec<TensorValue> {
        rows.iter().map(|r| TensorValue::vector(r).unwrap()).collect()
    }

    #[test]
    fn single_segment_is_tensor_exponential() {
        let pts = vecs(&[&[1.0, 2.0], &[1.5, 1.0]]);
        let s = signature_oracle(&pts, 3).unwrap();
        let delta = TensorValue::vector(&[0.5, -1.0]).unwrap();
        let mut power = delta.clone();
        let mut fact = 1.0;
        for (k, level) in s.iter().enumerate() {
            fact *= (k + 1) as f64;
            assert!(level.max_abs_diff(&power.scale(1.0 / fact).unwrap()).unwrap() < 1e-15);
            power = power.outer(&delta).unwrap();
        }
    }

    #[test]
    fn constant_path_has_zero_signature() {
        let mut coeffs = vec![0.0; 3 * 6];
        for i in 0..3 {
            coeffs[i * 6] = 0.3 * i as f64;
        }
        let p = path_from_coefficients(coeffs, 3, 5, 10, 3).unwrap();
        assert!(p.signature.iter().all(|s| s.norm() == 0.0));
    }

    #[test]
    fn discrete_baseline_by_hand() {
        let pts = vecs(&[&[0.0, 0.0], &[1.0, 0.0], &[1.0, 2.0]]);
        let s = discrete_signature_baseline(&pts, 2).unwrap();
        assert_eq!(s[0].components(), &[1.0, 2.0]);
        // Δ1 ⊗ Δ2 = e1 ⊗ 2e2
        assert_eq!(s[1].components(), &[0.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn chen_identity_on_random_points() {
        let mut rng = seeded(60);
        let pts: Vec<TensorValue> =
            (0..7).map(|_| TensorValue::vector(&[rng.random(), rng.random(), rng.random()]).unwrap()).collect();
        let whole = signature_oracle(&pts, 3).unwrap();
        let joined = chen_product(&signature_oracle(&pts[..4], 3).unwrap(), &signature_oracle(&pts[3..], 3).unwrap()).unwrap();
        for (a, b) in whole.iter().zip(&joined) {
            assert!(a.max_abs_diff(b).unwrap() < 1e-12);
        }
    }

    #[test]
    fn loss_weights_levels() {
        let z = vec![TensorValue::zeros(2, 1, Parity::Even).unwrap(), TensorValue::zeros(2, 2, Parity::Even).unwrap()];
        let one = vec![TensorValue::vector(&[1.0, 0.0]).unwrap(), TensorValue::new(2, 2, Parity::Even, vec![2.0, 0.0, 0.0, 0.0]).unwrap()];
        assert!((signature_loss(&z, &one).unwrap() - 0.5 * (0.5 + 1.0)).abs() < 1e-15);
        assert_eq!(signature_loss(&one, &one).unwrap(), 0.0);
    }

    #[test]
    fn generated_points_lie_on_the_path() {
        let mut rng = seeded(61);
        let p = gen_poly_path(&mut rng, 3, 5, 10, 3).unwrap();
        assert_eq!(p.points.len(), 10);
        let end = eval_poly_path(&p.coefficients, 3, 5, 1.0);
        assert_eq!(p.points[9].components(), end.as_slice());
        assert!(p.coefficients.iter().all(|c| c.abs() <= 1.0));
        let total: Vec<f64> = end.iter().zip(eval_poly_path(&p.coefficients, 3, 5, -1.0)).map(|(a, b)| a - b).collect();
        for (a, b) in p.signature[0].components().iter().zip(total) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
