//! Isotropic tensor bases.
//!
//! Even-parity invariants are index permutations of `θ^{⊗k/2}` where `θ` is
//! the metric tensor (`δ` in the Euclidean case). Odd-parity Euclidean
//! invariants are permutations of `δ^{⊗(k-d)/2} ⊗ ε`.
//!
//! Only one permutation per perfect matching of the index positions is kept.
//! For a matching `{a_1,b_1},…` with `a_1 < a_2 < …` and `a_i < b_i`, the
//! stored permutation is the inverse of the one-line word `(a_1,b_1,a_2,b_2,…)`,
//! so that `(θ^{⊗k/2})^σ` places factor `i` on positions `a_i, b_i`.

use crate::error::{Error, Result};
use crate::linalg::independent_columns;
use crate::perm::Permutation;
use crate::tensor::{kronecker_delta, levi_civita, metric_tensor, MetricSignature, Parity, TensorValue};

/// Relative singular-value threshold for linear independence.
pub const INDEPENDENCE_TOLERANCE: f64 = 1e-9;

/// All perfect matchings of `positions`, each as pairs `(a, b)` with `a < b`,
/// pairs listed by increasing `a`.
pub fn perfect_matchings(positions: &[usize]) -> Vec<Vec<(usize, usize)>> {
    if positions.is_empty() {
        return vec![Vec::new()];
    }
    if positions.len() % 2 != 0 {
        return Vec::new();
    }
    let mut sorted = positions.to_vec();
    sorted.sort_unstable();
    let first = sorted[0];
    let mut out = Vec::new();
    for j in 1..sorted.len() {
        let partner = sorted[j];
        let rest: Vec<usize> = sorted[1..].iter().copied().filter(|&x| x != partner).collect();
        for mut tail in perfect_matchings(&rest) {
            tail.insert(0, (first, partner));
            out.push(tail);
        }
    }
    out
}

fn sigma_from_word(word: Vec<usize>) -> Permutation {
    Permutation::new(word).expect("matching word is a permutation").inverse()
}

/// Reduced permutation set for `θ^{⊗k/2}`, sorted lexicographically.
pub fn enumerate_gk(k: usize) -> Result<Vec<Permutation>> {
    if k % 2 != 0 {
        return Err(Error::OddOrder(k));
    }
    let positions: Vec<usize> = (0..k).collect();
    let mut out: Vec<Permutation> = perfect_matchings(&positions)
        .into_iter()
        .map(|m| sigma_from_word(m.into_iter().flat_map(|(a, b)| [a, b]).collect()))
        .collect();
    out.sort();
    Ok(out)
}

/// Reduced permutation set for `δ^{⊗(k-d)/2} ⊗ ε`, sorted lexicographically.
/// Empty when `k < d` or `k - d` is odd.
pub fn enumerate_hk(k: usize, d: usize) -> Vec<Permutation> {
    if k < d || (k - d) % 2 != 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for eps_positions in combinations(k, d) {
        let rest: Vec<usize> = (0..k).filter(|p| !eps_positions.contains(p)).collect();
        for m in perfect_matchings(&rest) {
            let mut word: Vec<usize> = m.into_iter().flat_map(|(a, b)| [a, b]).collect();
            word.extend(&eps_positions);
            out.push(sigma_from_word(word));
        }
    }
    out.sort();
    out
}

/// Increasing `r`-subsets of `0..n`.
fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < r - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, r, &mut Vec::new(), &mut out);
    out
}

/// `k! / ((k/2)! 2^{k/2})`, zero for odd `k`.
pub fn gk_count(k: usize) -> usize {
    if k % 2 != 0 {
        return 0;
    }
    (1..k).step_by(2).product()
}

/// `k! / (((k-d)/2)! 2^{(k-d)/2} d!)`, zero in the vanishing cases.
pub fn hk_count(k: usize, d: usize) -> usize {
    if k < d || (k - d) % 2 != 0 {
        return 0;
    }
    binomial(k, d) * gk_count(k - d)
}

fn binomial(n: usize, r: usize) -> usize {
    (0..r).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisElement {
    pub sigma: Permutation,
    pub tensor: TensorValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsotropicBasis {
    pub order: usize,
    pub parity: Parity,
    pub metric: MetricSignature,
    pub elements: Vec<BasisElement>,
}

impl IsotropicBasis {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn tensors(&self) -> impl Iterator<Item = &TensorValue> {
        self.elements.iter().map(|e| &e.tensor)
    }

    /// Dimension of the span of the elements.
    pub fn span_dimension(&self) -> usize {
        let cols: Vec<Vec<f64>> = self.tensors().map(|t| t.components().to_vec()).collect();
        independent_columns(&cols, INDEPENDENCE_TOLERANCE).len()
    }
}

fn power(t: &TensorValue, n: usize) -> Result<TensorValue> {
    let mut acc = TensorValue::scalar(t.dim(), 1.0)?;
    for _ in 0..n {
        acc = acc.outer(t)?;
    }
    Ok(acc)
}

fn alternating_symbol(d: usize) -> Result<TensorValue> {
    if d == 1 {
        return TensorValue::new(1, 1, Parity::Odd, vec![1.0]);
    }
    levi_civita(d)
}

/// Invariant tensors of order `k` and the given parity for the group of `metric`.
pub fn isotropic_basis(k: usize, parity: Parity, metric: &MetricSignature) -> Result<IsotropicBasis> {
    let d = metric.dim();
    let mut elements = Vec::new();
    match parity {
        Parity::Even => {
            if k % 2 == 0 {
                let base = power(&metric_tensor(metric), k / 2)?;
                for sigma in enumerate_gk(k)? {
                    let tensor = base.permute_indices(&sigma)?;
                    elements.push(BasisElement { sigma, tensor });
                }
            }
        }
        Parity::Odd => {
            if !metric.is_euclidean() {
                return Err(Error::Unsupported(format!("odd-parity isotropic tensors for {metric}")));
            }
            let perms = enumerate_hk(k, d);
            if !perms.is_empty() {
                let base = power(&kronecker_delta(d)?, (k - d) / 2)?.outer(&alternating_symbol(d)?)?;
                for sigma in perms {
                    let tensor = base.permute_indices(&sigma)?;
                    elements.push(BasisElement { sigma, tensor });
                }
            }
        }
    }
    Ok(IsotropicBasis { order: k, parity, metric: *metric, elements })
}

/// A group of index permutations under which the contracted input is invariant,
/// e.g. swapping the two factors of `a ⊗ a`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSymmetry {
    perms: Vec<Permutation>,
}

impl IndexSymmetry {
    /// Closes `generators` under composition. All must have the same length.
    pub fn from_generators(order: usize, generators: &[Permutation]) -> Result<Self> {
        let mut perms = vec![Permutation::identity(order)];
        for g in generators {
            if g.len() != order {
                return Err(Error::InvalidPermutation(format!("generator {g} does not act on {order} indices")));
            }
        }
        let mut i = 0;
        while i < perms.len() {
            for g in generators {
                let next = g.compose(&perms[i])?;
                if !perms.contains(&next) {
                    perms.push(next);
                }
            }
            i += 1;
        }
        Ok(Self { perms })
    }

    /// Swaps of equal-length consecutive index blocks.
    ///
    /// `blocks` lists `(start, len)` of blocks holding copies of one input.
    pub fn block_swaps(order: usize, blocks: &[(usize, usize)]) -> Result<Self> {
        let mut gens = Vec::new();
        for w in blocks.windows(2) {
            let ((s1, l1), (s2, l2)) = (w[0], w[1]);
            if l1 != l2 || s1 + l1 > s2 || s2 + l2 > order {
                return Err(Error::InvalidArgument(format!("blocks {:?} cannot be swapped", w)));
            }
            let mut images: Vec<usize> = (0..order).collect();
            for t in 0..l1 {
                images.swap(s1 + t, s2 + t);
            }
            gens.push(Permutation::new(images)?);
        }
        Self::from_generators(order, &gens)
    }

    pub fn order(&self) -> usize {
        self.perms[0].len()
    }

    pub fn elements(&self) -> &[Permutation] {
        &self.perms
    }

    /// Average of `t^h` over the group.
    pub fn symmetrize(&self, t: &TensorValue) -> Result<TensorValue> {
        let mut acc = TensorValue::zeros(t.dim(), t.order(), t.parity())?;
        for h in &self.perms {
            acc.axpy(1.0, &t.permute_indices(h)?)?;
        }
        acc.scale(1.0 / self.perms.len() as f64)
    }
}

/// Maximal linearly independent subset, optionally after symmetrizing each
/// element under `symmetry`. The retained elements are returned unchanged.
pub fn independent_subset(basis: &IsotropicBasis, symmetry: Option<&IndexSymmetry>) -> Result<IsotropicBasis> {
    let mut cols = Vec::with_capacity(basis.len());
    for e in &basis.elements {
        let t = match symmetry {
            Some(s) => {
                if s.order() != basis.order {
                    return Err(Error::OrderMismatch { expected: basis.order, got: s.order() });
                }
                s.symmetrize(&e.tensor)?
            }
            None => e.tensor.clone(),
        };
        cols.push(t.into_components());
    }
    let keep = independent_columns(&cols, INDEPENDENCE_TOLERANCE);
    Ok(IsotropicBasis {
        order: basis.order,
        parity: basis.parity,
        metric: basis.metric,
        elements: keep.into_iter().map(|i| basis.elements[i].clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{group_act, sample_group};
    use crate::rng::seeded;

    fn one_based(perms: &[Permutation]) -> Vec<Vec<usize>> {
        perms.iter().map(|p| p.one_based()).collect()
    }

    #[test]
    fn g4_listing() {
        assert_eq!(one_based(&enumerate_gk(2).unwrap()), vec![vec![1, 2]]);
        assert_eq!(
            one_based(&enumerate_gk(4).unwrap()),
            vec![vec![1, 2, 3, 4], vec![1, 3, 2, 4], vec![1, 3, 4, 2]]
        );
        assert_eq!(enumerate_gk(0).unwrap().len(), 1);
        assert_eq!(enumerate_gk(3), Err(Error::OddOrder(3)));
    }

    #[test]
    fn g6_listing() {
        let expect = vec![
            vec![1, 2, 3, 4, 5, 6],
            vec![1, 2, 3, 5, 4, 6],
            vec![1, 2, 3, 5, 6, 4],
            vec![1, 3, 2, 4, 5, 6],
            vec![1, 3, 2, 5, 4, 6],
            vec![1, 3, 2, 5, 6, 4],
            vec![1, 3, 4, 2, 5, 6],
            vec![1, 3, 4, 5, 2, 6],
            vec![1, 3, 4, 5, 6, 2],
            vec![1, 3, 5, 2, 4, 6],
            vec![1, 3, 5, 2, 6, 4],
            vec![1, 3, 5, 4, 2, 6],
            vec![1, 3, 5, 4, 6, 2],
            vec![1, 3, 5, 6, 2, 4],
            vec![1, 3, 5, 6, 4, 2],
        ];
        assert_eq!(one_based(&enumerate_gk(6).unwrap()), expect);
    }

    #[test]
    fn gk_membership_condition() {
        // the inverse word has increasing pair heads and ordered pairs
        for k in [2, 4, 6, 8] {
            let perms = enumerate_gk(k).unwrap();
            assert_eq!(perms.len(), gk_count(k));
            for p in perms {
                let w = p.inverse();
                let w = w.images();
                assert!((0..k / 2).all(|i| w[2 * i] < w[2 * i + 1]));
                assert!((1..k / 2).all(|i| w[2 * i - 2] < w[2 * i]));
            }
        }
        assert_eq!(gk_count(8), 105);
    }

    #[test]
    fn hk_counts() {
        for d in 2..5 {
            assert_eq!(enumerate_hk(d, d).len(), 1);
            assert!(enumerate_hk(d + 1, d).is_empty());
            assert!(enumerate_hk(d - 1, d).is_empty());
            assert_eq!(enumerate_hk(d + 2, d).len(), (d + 1) * (d + 2) / 2);
            for k in d..d + 5 {
                assert_eq!(enumerate_hk(k, d).len(), hk_count(k, d));
            }
        }
    }

    #[test]
    fn hk_matches_brute_force_at_d2() {
        // brute force: distinct tensors (δ^{⊗(k-2)/2} ⊗ ε)^σ up to the stabilizer,
        // counted as distinct permuted arrays over all σ ∈ S_k.
        for k in [2, 4] {
            let base = power(&kronecker_delta(2).unwrap(), (k - 2) / 2).unwrap().outer(&levi_civita(2).unwrap()).unwrap();
            let mut seen: Vec<Vec<f64>> = Vec::new();
            for s in crate::perm::all_permutations(k) {
                let t = base.permute_indices(&s).unwrap().into_components();
                let neg: Vec<f64> = t.iter().map(|x| -x).collect();
                if !seen.contains(&t) && !seen.contains(&neg) {
                    seen.push(t);
                }
            }
            assert_eq!(seen.len(), hk_count(k, 2));
        }
    }

    #[test]
    fn small_bases() {
        let e3 = MetricSignature::euclidean(3).unwrap();
        let b = isotropic_basis(2, Parity::Even, &e3).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b.elements[0].tensor, kronecker_delta(3).unwrap());
        assert!(isotropic_basis(3, Parity::Even, &e3).unwrap().is_empty());
        let b4 = isotropic_basis(4, Parity::Even, &e3).unwrap();
        assert_eq!(b4.len(), 3);
        assert_eq!(b4.span_dimension(), 3);
        let eps = isotropic_basis(3, Parity::Odd, &e3).unwrap();
        assert_eq!(eps.elements[0].tensor, levi_civita(3).unwrap());
        assert!(isotropic_basis(2, Parity::Odd, &MetricSignature::lorentz()).is_err());
    }

    #[test]
    fn elements_are_invariant() {
        let mut rng = seeded(11);
        let cases = [
            (4, Parity::Even, MetricSignature::euclidean(3).unwrap()),
            (5, Parity::Odd, MetricSignature::euclidean(3).unwrap()),
            (4, Parity::Odd, MetricSignature::euclidean(2).unwrap()),
            (4, Parity::Even, MetricSignature::lorentz()),
            (4, Parity::Even, MetricSignature::symplectic(4).unwrap()),
            (2, Parity::Even, MetricSignature::minkowski(2, 1).unwrap()),
        ];
        for (k, p, m) in cases {
            let basis = isotropic_basis(k, p, &m).unwrap();
            assert!(!basis.is_empty());
            for _ in 0..64 {
                let g = sample_group(&m, &mut rng).unwrap();
                for t in basis.tensors() {
                    let moved = group_act(&g, t).unwrap();
                    assert!(moved.max_abs_diff(t).unwrap() < 1e-9, "{k} {p} {m}");
                }
            }
        }
    }

    #[test]
    fn symmetric_square_merges_two_terms() {
        let e3 = MetricSignature::euclidean(3).unwrap();
        let b = isotropic_basis(4, Parity::Even, &e3).unwrap();
        let sym = IndexSymmetry::from_generators(4, &[Permutation::new(vec![1, 0, 2, 3]).unwrap()]).unwrap();
        assert_eq!(sym.elements().len(), 2);
        assert_eq!(independent_subset(&b, Some(&sym)).unwrap().len(), 2);
        assert_eq!(independent_subset(&b, None).unwrap(), b);
    }

    #[test]
    fn block_swap_group() {
        let s = IndexSymmetry::block_swaps(6, &[(0, 2), (2, 2)]).unwrap();
        assert_eq!(s.elements().len(), 2);
        assert_eq!(s.elements()[1].one_based(), vec![3, 4, 1, 2, 5, 6]);
        let three = IndexSymmetry::block_swaps(3, &[(0, 1), (1, 1), (2, 1)]).unwrap();
        assert_eq!(three.elements().len(), 6);
    }
}
