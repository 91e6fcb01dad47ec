//! Dense tensors over `R^d` carrying a parity flag.
//!
//! Components are stored row-major: index `(i_1,…,i_k)` lives at offset
//! `Σ i_q d^{k-q}` (zero-based indices).

mod codec;
mod metric;

use std::fmt;

use nalgebra::DMatrix;

pub use codec::{decode_tensor, encode_tensor, read_tensor, write_tensor, TENSOR_MAGIC};
pub use metric::{MetricKind, MetricSignature};

use crate::error::{Error, Result};
use crate::perm::Permutation;

/// Parity of a tensor: `Even` for ordinary tensors, `Odd` for pseudotensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> i8 {
        match self {
            Parity::Even => 1,
            Parity::Odd => -1,
        }
    }

    pub fn from_sign(s: i8) -> Result<Self> {
        match s {
            1 => Ok(Parity::Even),
            -1 => Ok(Parity::Odd),
            _ => Err(Error::InvalidArgument(format!("parity must be +1 or -1, got {s}"))),
        }
    }

    pub fn mul(self, other: Parity) -> Parity {
        if self == other {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parity::Even => "+",
            Parity::Odd => "-",
        })
    }
}

impl std::str::FromStr for Parity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "+" | "+1" | "1" | "even" => Ok(Parity::Even),
            "-" | "-1" | "odd" => Ok(Parity::Odd),
            other => Err(Error::InvalidArgument(format!("cannot parse parity '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorValue {
    dim: usize,
    order: usize,
    parity: Parity,
    data: Vec<f64>,
}

fn checked_len(dim: usize, order: usize) -> Result<usize> {
    u32::try_from(order)
        .ok()
        .and_then(|o| dim.checked_pow(o))
        .ok_or_else(|| Error::InvalidArgument(format!("{dim}^{order} components overflow")))
}

fn ensure_finite(data: &[f64], what: &'static str) -> Result<()> {
    if data.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

impl TensorValue {
    pub fn new(dim: usize, order: usize, parity: Parity, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        let expected = checked_len(dim, order)?;
        if data.len() != expected {
            return Err(Error::BadLength { expected, got: data.len() });
        }
        ensure_finite(&data, "tensor construction")?;
        Ok(Self { dim, order, parity, data })
    }

    pub fn zeros(dim: usize, order: usize, parity: Parity) -> Result<Self> {
        let len = checked_len(dim, order)?;
        Self::new(dim, order, parity, vec![0.0; len])
    }

    pub fn scalar(dim: usize, value: f64) -> Result<Self> {
        Self::new(dim, 0, Parity::Even, vec![value])
    }

    pub fn vector(components: &[f64]) -> Result<Self> {
        Self::new(components.len(), 1, Parity::Even, components.to_vec())
    }

    /// Standard basis vector `e_i` (zero-based `i`).
    pub fn basis_vector(dim: usize, i: usize) -> Result<Self> {
        if i >= dim {
            return Err(Error::InvalidArgument(format!("basis index {i} out of range for dimension {dim}")));
        }
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        Self::vector(&v)
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        let d = m.nrows();
        let mut data = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                data.push(m[(i, j)]);
            }
        }
        Self::new(d, 2, Parity::Even, data)
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.order != 2 {
            return Err(Error::OrderMismatch { expected: 2, got: self.order });
        }
        Ok(DMatrix::from_row_slice(self.dim, self.dim, &self.data))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn components(&self) -> &[f64] {
        &self.data
    }

    pub fn into_components(self) -> Vec<f64> {
        self.data
    }

    pub fn with_parity(mut self, parity: Parity) -> Self {
        self.parity = parity;
        self
    }

    pub fn offset(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.order {
            return Err(Error::OrderMismatch { expected: self.order, got: index.len() });
        }
        let mut off = 0;
        for &i in index {
            if i >= self.dim {
                return Err(Error::InvalidArgument(format!("index {i} out of range for dimension {}", self.dim)));
            }
            off = off * self.dim + i;
        }
        Ok(off)
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.data[self.offset(index)?])
    }

    /// Value of an order-0 tensor.
    pub fn scalar_value(&self) -> Result<f64> {
        if self.order != 0 {
            return Err(Error::OrderMismatch { expected: 0, got: self.order });
        }
        Ok(self.data[0])
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &TensorValue) -> Result<f64> {
        self.check_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// Frobenius distance, ignoring parity.
    pub fn distance(&self, other: &TensorValue) -> Result<f64> {
        self.check_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
    }

    fn check_shape(&self, other: &TensorValue) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        if self.order != other.order {
            return Err(Error::OrderMismatch { expected: self.order, got: other.order });
        }
        Ok(())
    }

    pub fn add(&self, other: &TensorValue) -> Result<TensorValue> {
        self.check_shape(other)?;
        if self.parity != other.parity {
            return Err(Error::ParityMismatch);
        }
        let data: Vec<f64> = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        ensure_finite(&data, "add")?;
        Ok(Self { data, ..*self })
    }

    pub fn scale(&self, c: f64) -> Result<TensorValue> {
        let data: Vec<f64> = self.data.iter().map(|a| c * a).collect();
        ensure_finite(&data, "scale")?;
        Ok(Self { data, ..*self })
    }

    /// In-place `self += c * other`; shapes and parities must agree.
    pub fn axpy(&mut self, c: f64, other: &TensorValue) -> Result<()> {
        self.check_shape(other)?;
        if self.parity != other.parity {
            return Err(Error::ParityMismatch);
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
        ensure_finite(&self.data, "axpy")
    }

    /// Frobenius inner product of the component arrays.
    pub fn dot(&self, other: &TensorValue) -> Result<f64> {
        self.check_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn outer(&self, other: &TensorValue) -> Result<TensorValue> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let mut data = Vec::with_capacity(self.data.len() * other.data.len());
        for &a in &self.data {
            data.extend(other.data.iter().map(|b| a * b));
        }
        ensure_finite(&data, "outer")?;
        Ok(Self {
            dim: self.dim,
            order: self.order + other.order,
            parity: self.parity.mul(other.parity),
            data,
        })
    }

    /// Pairs index `q` with index `k+q` for `q = 1..k` through `metric`,
    /// with the metric's first index on `q`.
    pub fn contract(&self, k: usize, metric: &MetricSignature) -> Result<TensorValue> {
        if metric.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: metric.dim(), got: self.dim });
        }
        if self.order < 2 * k {
            return Err(Error::OrderTooSmall { order: self.order, k });
        }
        let d = self.dim;
        let rest_order = self.order - 2 * k;
        let rest_len = d.pow(rest_order as u32);
        let block = d.pow(k as u32);
        let mut out = vec![0.0; rest_len];
        let pairing: Vec<(usize, f64)> = (0..d).map(|i| metric.pairing(i)).collect();
        let mut idx = vec![0usize; k];
        for first in 0..block {
            // decode first-block multi-index and find its metric partner
            let mut rem = first;
            for q in (0..k).rev() {
                idx[q] = rem % d;
                rem /= d;
            }
            let mut second = 0;
            let mut weight = 1.0;
            for &i in &idx {
                let (j, s) = pairing[i];
                second = second * d + j;
                weight *= s;
            }
            let base = (first * block + second) * rest_len;
            for (o, a) in out.iter_mut().zip(&self.data[base..base + rest_len]) {
                *o += weight * a;
            }
        }
        let parity = self.parity;
        ensure_finite(&out, "contract")?;
        Ok(Self { dim: d, order: rest_order, parity, data: out })
    }

    /// `[a^σ]_{i_1..i_k} = [a]_{i_{σ⁻¹(1)}..i_{σ⁻¹(k)}}`.
    pub fn permute_indices(&self, sigma: &Permutation) -> Result<TensorValue> {
        let k = self.order;
        if sigma.len() != k {
            return Err(Error::InvalidPermutation(format!(
                "permutation of length {} applied to order-{k} tensor",
                sigma.len()
            )));
        }
        if sigma.is_identity() {
            return Ok(self.clone());
        }
        let d = self.dim;
        let mut strides = vec![1usize; k];
        for q in (0..k.saturating_sub(1)).rev() {
            strides[q] = strides[q + 1] * d;
        }
        let src_strides: Vec<usize> = (0..k).map(|p| strides[sigma.apply(p)]).collect();
        let mut out = Vec::with_capacity(self.data.len());
        let mut idx = vec![0usize; k];
        let mut src = 0usize;
        for _ in 0..self.data.len() {
            out.push(self.data[src]);
            // odometer increment, tracking the source offset
            for p in (0..k).rev() {
                idx[p] += 1;
                src += src_strides[p];
                if idx[p] < d {
                    break;
                }
                src -= src_strides[p] * d;
                idx[p] = 0;
            }
        }
        Ok(Self { data: out, ..*self })
    }

    /// Applies `m` along every axis and multiplies by `character`.
    pub fn act_matrix(&self, m: &DMatrix<f64>, character: f64) -> Result<TensorValue> {
        let d = self.dim;
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: m.nrows() });
        }
        let mut cur = self.data.clone();
        let mut next = vec![0.0; cur.len()];
        for q in 0..self.order {
            let outer = d.pow(q as u32);
            let inner = d.pow((self.order - q - 1) as u32);
            next.iter_mut().for_each(|x| *x = 0.0);
            for o in 0..outer {
                let base = o * d * inner;
                for i in 0..d {
                    let dst = base + i * inner;
                    for j in 0..d {
                        let w = m[(i, j)];
                        if w == 0.0 {
                            continue;
                        }
                        let src = base + j * inner;
                        for t in 0..inner {
                            next[dst + t] += w * cur[src + t];
                        }
                    }
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        if character != 1.0 {
            cur.iter_mut().for_each(|x| *x *= character);
        }
        ensure_finite(&cur, "group action")?;
        Ok(Self { data: cur, ..*self })
    }

    /// Symmetric part of an order-2 tensor.
    pub fn symmetrized_matrix(&self) -> Result<TensorValue> {
        let m = self.to_matrix()?;
        let s = (&m + m.transpose()) * 0.5;
        Ok(TensorValue::from_matrix(&s)?.with_parity(self.parity))
    }
}

/// Order-2 identity.
pub fn kronecker_delta(d: usize) -> Result<TensorValue> {
    TensorValue::from_matrix(&DMatrix::identity(d, d))
}

/// Order-`d` alternating symbol with parity −1.
pub fn levi_civita(d: usize) -> Result<TensorValue> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("Levi-Civita symbol needs d >= 2, got {d}")));
    }
    let mut t = TensorValue::zeros(d, d, Parity::Odd)?;
    for p in crate::perm::all_permutations(d) {
        let off = t.offset(p.images())?;
        t.data[off] = p.sign() as f64;
    }
    Ok(t)
}

/// The metric as an order-2 tensor.
pub fn metric_tensor(metric: &MetricSignature) -> TensorValue {
    TensorValue::from_matrix(&metric.matrix()).expect("metric matrix is square and finite")
}

/// `uᵀ θ v` for two order-1 tensors.
pub fn inner_product(u: &TensorValue, v: &TensorValue, metric: &MetricSignature) -> Result<f64> {
    for t in [u, v] {
        if t.order != 1 {
            return Err(Error::OrderMismatch { expected: 1, got: t.order });
        }
        if t.dim != metric.dim() {
            return Err(Error::DimensionMismatch { expected: metric.dim(), got: t.dim });
        }
    }
    Ok(metric.form(&u.data, &v.data))
}

/// Outer product of a list; the empty list gives the scalar 1.
pub fn outer_all(dim: usize, factors: &[&TensorValue]) -> Result<TensorValue> {
    let mut acc = TensorValue::scalar(dim, 1.0)?;
    for f in factors {
        acc = acc.outer(f)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn e(d: usize, i: usize) -> TensorValue {
        TensorValue::basis_vector(d, i).unwrap()
    }

    fn rand_tensor(d: usize, k: usize, seed: u64) -> TensorValue {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let data = (0..d.pow(k as u32))
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect();
        TensorValue::new(d, k, Parity::Even, data).unwrap()
    }

    #[test]
    fn construction_checks() {
        assert!(TensorValue::new(2, 2, Parity::Even, vec![0.0; 3]).is_err());
        assert!(TensorValue::new(2, 1, Parity::Even, vec![f64::NAN, 0.0]).is_err());
        assert_eq!(TensorValue::zeros(3, 0, Parity::Even).unwrap().components().len(), 1);
    }

    #[test]
    fn outer_of_basis_vectors() {
        let m = e(2, 0).outer(&e(2, 1)).unwrap();
        assert_eq!(m.components(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn scalar_outer_scales() {
        let b = rand_tensor(3, 2, 1);
        let three = TensorValue::scalar(3, 3.0).unwrap();
        assert_eq!(three.outer(&b).unwrap(), b.scale(3.0).unwrap());
    }

    #[test]
    fn outer_parity_multiplies() {
        let a = e(2, 0).with_parity(Parity::Odd);
        assert_eq!(a.outer(&a).unwrap().parity(), Parity::Even);
        assert_eq!(a.outer(&e(2, 1)).unwrap().parity(), Parity::Odd);
        assert!(a.outer(&e(3, 0)).is_err());
    }

    #[test]
    fn five_fold_outer_matches_loop_nest() {
        let v: Vec<TensorValue> = (0..5).map(|s| rand_tensor(3, 1, s + 10)).collect();
        let refs: Vec<&TensorValue> = v.iter().collect();
        let t = outer_all(3, &refs).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    for x in 0..3 {
                        for y in 0..3 {
                            let expect = v[0].components()[a]
                                * v[1].components()[b]
                                * v[2].components()[c]
                                * v[3].components()[x]
                                * v[4].components()[y];
                            assert_eq!(t.get(&[a, b, c, x, y]).unwrap(), expect);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn contraction_pairs_first_block_with_second() {
        let euc = MetricSignature::euclidean(3).unwrap();
        let v: Vec<TensorValue> = (0..5).map(|s| rand_tensor(3, 1, s + 20)).collect();
        let refs: Vec<&TensorValue> = v.iter().collect();
        let t = outer_all(3, &refs).unwrap();
        let c = t.contract(2, &euc).unwrap();
        let ux = inner_product(&v[0], &v[2], &euc).unwrap();
        let vy = inner_product(&v[1], &v[3], &euc).unwrap();
        let expect = v[4].scale(ux * vy).unwrap();
        assert!(c.max_abs_diff(&expect).unwrap() < 1e-14);
    }

    #[test]
    fn trace_of_delta() {
        let euc = MetricSignature::euclidean(4).unwrap();
        let t = kronecker_delta(4).unwrap().contract(1, &euc).unwrap();
        assert_eq!(t.scalar_value().unwrap(), 4.0);
        assert!(kronecker_delta(4).unwrap().contract(2, &euc).is_err());
    }

    #[test]
    fn symplectic_double_contraction() {
        for d in [2, 4, 6] {
            let sp = MetricSignature::symplectic(d).unwrap();
            let j = metric_tensor(&sp);
            let jj = j.outer(&j).unwrap();
            let got = jj.contract(2, &sp).unwrap().scalar_value().unwrap();
            // direct sum over the metric-weighted pairs (1,3), (2,4)
            let m = sp.matrix();
            let mut expect = 0.0;
            for a in 0..d {
                for b in 0..d {
                    for c in 0..d {
                        for f in 0..d {
                            expect += jj.get(&[a, b, c, f]).unwrap() * m[(a, c)] * m[(b, f)];
                        }
                    }
                }
            }
            assert_eq!(got, expect);
            assert_eq!(got, d as f64);
        }
    }

    #[test]
    fn transpose_via_permutation() {
        let a = rand_tensor(3, 2, 5);
        let t = a.permute_indices(&Permutation::new(vec![1, 0]).unwrap()).unwrap();
        assert_eq!(t.to_matrix().unwrap(), a.to_matrix().unwrap().transpose());
    }

    #[test]
    fn permuted_delta_product() {
        let d = 3;
        let dd = kronecker_delta(d).unwrap().outer(&kronecker_delta(d).unwrap()).unwrap();
        let p = dd.permute_indices(&Permutation::from_one_based(&[1, 3, 2, 4]).unwrap()).unwrap();
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let expect = ((i == k) as u8 * (j == l) as u8) as f64;
                        assert_eq!(p.get(&[i, j, k, l]).unwrap(), expect);
                    }
                }
            }
        }
    }

    #[test]
    fn permutation_places_factor_slots() {
        // (x1⊗x2⊗x3)^σ = x_{σ(1)}⊗x_{σ(2)}⊗x_{σ(3)}
        let v: Vec<TensorValue> = (0..3).map(|s| rand_tensor(2, 1, s + 40)).collect();
        let sigma = Permutation::from_one_based(&[2, 3, 1]).unwrap();
        let t = outer_all(2, &[&v[0], &v[1], &v[2]]).unwrap().permute_indices(&sigma).unwrap();
        let expect = outer_all(2, &[&v[1], &v[2], &v[0]]).unwrap();
        assert!(t.max_abs_diff(&expect).unwrap() < 1e-15);
    }

    #[test]
    fn identity_permutation_is_bitwise() {
        let a = rand_tensor(3, 3, 9);
        assert_eq!(a.permute_indices(&Permutation::identity(3)).unwrap(), a);
        assert!(a.permute_indices(&Permutation::identity(2)).is_err());
    }

    #[test]
    fn special_tensors() {
        assert_eq!(levi_civita(2).unwrap().components(), &[0.0, 1.0, -1.0, 0.0]);
        assert_eq!(levi_civita(3).unwrap().get(&[1, 0, 2]).unwrap(), -1.0);
        assert_eq!(levi_civita(2).unwrap().parity(), Parity::Odd);
        assert!(levi_civita(1).is_err());
        assert_eq!(kronecker_delta(3).unwrap().to_matrix().unwrap(), DMatrix::identity(3, 3));
        let m = metric_tensor(&MetricSignature::lorentz()).to_matrix().unwrap();
        assert_eq!(m, DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0, -1.0, -1.0])));
    }

    #[test]
    fn inner_products() {
        let l = MetricSignature::lorentz();
        assert_eq!(inner_product(&e(4, 0), &e(4, 0), &l).unwrap(), 1.0);
        assert_eq!(inner_product(&e(4, 3), &e(4, 3), &l).unwrap(), -1.0);
        let sp = MetricSignature::symplectic(4).unwrap();
        assert_eq!(inner_product(&e(4, 0), &e(4, 2), &sp).unwrap(), 1.0);
        assert_eq!(inner_product(&e(4, 0), &e(4, 0), &sp).unwrap(), 0.0);
    }

    #[test]
    fn add_checks_parity() {
        let a = rand_tensor(2, 2, 3);
        let z = a.add(&a.scale(-1.0).unwrap()).unwrap();
        assert_eq!(z.norm(), 0.0);
        assert_eq!(a.add(&a.clone().with_parity(Parity::Odd)), Err(Error::ParityMismatch));
    }

    proptest! {
        #[test]
        fn permute_then_inverse_is_identity(seed in 0u64..1000, k in 1usize..5, rot in 0usize..24) {
            let a = rand_tensor(3, k, seed);
            let perms = crate::perm::all_permutations(k);
            let s = &perms[rot % perms.len()];
            let back = a.permute_indices(s).unwrap().permute_indices(&s.inverse()).unwrap();
            prop_assert_eq!(back, a);
        }

        #[test]
        fn outer_is_bilinear(seed in 0u64..1000, c in -3.0f64..3.0) {
            let a = rand_tensor(2, 2, seed);
            let b = rand_tensor(2, 1, seed + 1);
            let b2 = rand_tensor(2, 1, seed + 2);
            let lhs = a.outer(&b.scale(c).unwrap().add(&b2).unwrap()).unwrap();
            let rhs = a.outer(&b).unwrap().scale(c).unwrap().add(&a.outer(&b2).unwrap()).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);
        }

        #[test]
        fn contraction_is_linear(seed in 0u64..1000, c in -3.0f64..3.0) {
            let m = MetricSignature::symplectic(2).unwrap();
            let a = rand_tensor(2, 4, seed);
            let b = rand_tensor(2, 4, seed + 7);
            let lhs = a.scale(c).unwrap().add(&b).unwrap().contract(1, &m).unwrap();
            let rhs = a.contract(1, &m).unwrap().scale(c).unwrap().add(&b.contract(1, &m).unwrap()).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);
        }

        #[test]
        fn forms_have_expected_symmetry(seed in 0u64..1000) {
            let u = rand_tensor(4, 1, seed);
            let v = rand_tensor(4, 1, seed + 3);
            let sp = MetricSignature::symplectic(4).unwrap();
            let mk = MetricSignature::lorentz();
            prop_assert!((inner_product(&u, &v, &sp).unwrap() + inner_product(&v, &u, &sp).unwrap()).abs() < 1e-15);
            prop_assert!((inner_product(&u, &v, &mk).unwrap() - inner_product(&v, &u, &mk).unwrap()).abs() < 1e-15);
        }
    }
}
