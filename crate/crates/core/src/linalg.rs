//! Dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Eigen-decomposition of a symmetric matrix with eigenvalues ascending.
/// Column `i` of the returned matrix is the eigenvector for value `i`.
pub fn sym_eigen_sorted(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Eigen("non-finite input".into()));
    }
    let eig = SymmetricEigen::try_new(m.clone(), 1e-15, 10_000)
        .ok_or_else(|| Error::Eigen("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.iter().map(|x| x.abs()).fold(0.0, f64::max) * n as f64;
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let x = a * scale;
    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=20 {
        term = &term * &x / k as f64;
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    // column-major fill order is part of the reproducibility contract
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal folded into `Q`.
pub fn haar_orthogonal<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, d, d);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Orthonormal basis of the column span (thin QR), keeping column order.
pub fn orthonormal_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().qr().q()
}

/// Numerical rank with singular values below `rel_tol * σ_max` treated as zero.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = singular_values(m);
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    // SVD of the smaller Gram side is enough for ranks
    if m.nrows() >= m.ncols() {
        m.clone().svd(false, false).singular_values.iter().cloned().collect()
    } else {
        m.transpose().svd(false, false).singular_values.iter().cloned().collect()
    }
}

/// Greedily picks columns that raise the rank, in order.
///
/// The threshold is relative to the largest singular value of the full
/// column set so the decision does not depend on the visiting order's scale.
pub fn independent_columns(columns: &[Vec<f64>], rel_tol: f64) -> Vec<usize> {
    if columns.is_empty() {
        return Vec::new();
    }
    let len = columns[0].len();
    let full = DMatrix::from_fn(len, columns.len(), |i, j| columns[j][i]);
    let sv_max = singular_values(&full).into_iter().fold(0.0, f64::max);
    if sv_max == 0.0 {
        return Vec::new();
    }
    let mut chosen: Vec<usize> = Vec::new();
    for j in 0..columns.len() {
        let mut trial = chosen.clone();
        trial.push(j);
        let m = DMatrix::from_fn(len, trial.len(), |i, c| columns[trial[c]][i]);
        let r = singular_values(&m).iter().filter(|&&s| s > rel_tol * sv_max).count();
        if r == trial.len() {
            chosen.push(j);
        }
    }
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn eigen_sorted_reconstructs() {
        let mut rng = seeded(1);
        let g = gaussian_matrix(&mut rng, 4, 4);
        let a = &g + g.transpose();
        let (vals, vecs) = sym_eigen_sorted(&a).unwrap();
        assert!(vals.as_slice().windows(2).all(|w| w[0] <= w[1]));
        let rebuilt = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
        assert!((rebuilt - a).abs().max() < 1e-12);
    }

    #[test]
    fn expm_of_rotation_generator() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let e = expm(&a);
        let (c, s) = (1f64.cos(), 1f64.sin());
        let expect = DMatrix::from_row_slice(2, 2, &[c, s, -s, c]);
        assert!((e - expect).abs().max() < 1e-14);
        assert_eq!(expm(&DMatrix::zeros(3, 3)), DMatrix::identity(3, 3));
    }

    #[test]
    fn expm_of_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -2.0, 0.5]));
        let e = expm(&a);
        for (i, x) in [3.0f64, -2.0, 0.5].iter().enumerate() {
            assert!((e[(i, i)] - x.exp()).abs() < 1e-12 * x.exp());
        }
    }

    #[test]
    fn haar_is_orthogonal() {
        let mut rng = seeded(2);
        for d in 1..6 {
            let q = haar_orthogonal(&mut rng, d);
            assert!((q.transpose() * &q - DMatrix::identity(d, d)).abs().max() < 1e-12);
        }
    }

    #[test]
    fn rank_and_independence() {
        let cols = vec![vec![1.0, 0.0, 0.0], vec![2.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![1.0, 1.0, 0.0]];
        assert_eq!(independent_columns(&cols, 1e-9), vec![0, 2]);
        let m = DMatrix::from_fn(3, 4, |i, j| cols[j][i]);
        assert_eq!(rank(&m, 1e-9), 2);
        assert_eq!(rank(&DMatrix::zeros(2, 2), 1e-9), 0);
    }
}
