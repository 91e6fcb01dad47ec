//! Basis terms `(v_{J_1} ⊗ … ⊗ v_{J_m} ⊗ θ^{⊗t})^σ` of vectors-to-tensor maps.
//!
//! Internally a term is a *layout*: for every output position either the
//! input vector sitting there or the position paired with it through `θ`.
//! The canonical `(t, σ, J)` description is derived from the layout.

use std::fmt;

use crate::basis::perfect_matchings;
use crate::error::{Error, Result};
use crate::perm::Permutation;
use crate::tensor::{metric_tensor, outer_all, MetricSignature, TensorValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    /// Input vector index (zero-based).
    Vector(usize),
    /// First index of a `θ` factor whose second index is at the given position.
    PairFirst(usize),
    /// Second index of a `θ` factor whose first index is at the given position.
    PairSecond(usize),
}

/// One basis term in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BasisTerm {
    /// Number of metric-tensor factors.
    pub t: usize,
    pub sigma: Permutation,
    /// Non-decreasing zero-based input indices, length `k' - 2t`.
    pub j: Vec<usize>,
}

impl fmt::Display for BasisTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let j: Vec<String> = self.j.iter().map(|x| (x + 1).to_string()).collect();
        write!(f, "t={} sigma={} J=({})", self.t, self.sigma, j.join(","))
    }
}

impl BasisTerm {
    pub fn order(&self) -> usize {
        self.sigma.len()
    }

    /// Position-wise layout of this term.
    pub fn layout(&self) -> Result<Vec<Slot>> {
        let k = self.sigma.len();
        let m = self.j.len();
        if m + 2 * self.t != k {
            return Err(Error::InvalidArgument(format!("term {self} has inconsistent sizes")));
        }
        if self.j.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument(format!("term {self} has decreasing J")));
        }
        let inv = self.sigma.inverse();
        let mut layout = Vec::with_capacity(k);
        for p in 0..k {
            let slot = self.sigma.apply(p);
            layout.push(if slot < m {
                Slot::Vector(self.j[slot])
            } else {
                let pair_slot = (slot - m) / 2;
                let first = m + 2 * pair_slot;
                if slot == first {
                    Slot::PairFirst(inv.apply(first + 1))
                } else {
                    Slot::PairSecond(inv.apply(first))
                }
            });
        }
        Ok(layout)
    }

    /// Canonical term for a layout.
    pub fn from_layout(layout: &[Slot]) -> Result<Self> {
        let k = layout.len();
        let mut vec_positions: Vec<(usize, usize)> = Vec::new();
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for (p, s) in layout.iter().enumerate() {
            match *s {
                Slot::Vector(v) => vec_positions.push((v, p)),
                Slot::PairFirst(q) => {
                    if q >= k || layout[q] != Slot::PairSecond(p) {
                        return Err(Error::InvalidArgument(format!("unmatched pair at position {p}")));
                    }
                    pairs.push((p, q));
                }
                Slot::PairSecond(q) => {
                    if q >= k || layout[q] != Slot::PairFirst(p) {
                        return Err(Error::InvalidArgument(format!("unmatched pair at position {p}")));
                    }
                }
            }
        }
        vec_positions.sort();
        pairs.sort_by_key(|&(a, b)| a.min(b));
        let m = vec_positions.len();
        let mut sigma = vec![0usize; k];
        for (slot, &(_, p)) in vec_positions.iter().enumerate() {
            sigma[p] = slot;
        }
        for (i, &(first, second)) in pairs.iter().enumerate() {
            sigma[first] = m + 2 * i;
            sigma[second] = m + 2 * i + 1;
        }
        Ok(Self {
            t: pairs.len(),
            sigma: Permutation::new(sigma)?,
            j: vec_positions.into_iter().map(|(v, _)| v).collect(),
        })
    }

    /// Reference evaluation through outer products and an index permutation.
    pub fn evaluate(&self, vectors: &[TensorValue], metric: &MetricSignature) -> Result<TensorValue> {
        let d = metric.dim();
        let theta = metric_tensor(metric);
        let mut factors: Vec<&TensorValue> = Vec::new();
        for &i in &self.j {
            factors.push(vectors.get(i).ok_or_else(|| {
                Error::InvalidArgument(format!("term refers to input {} of {}", i + 1, vectors.len()))
            })?);
        }
        for _ in 0..self.t {
            factors.push(&theta);
        }
        outer_all(d, &factors)?.permute_indices(&self.sigma)
    }
}

/// All layouts of order `k` over `n` inputs, grouped by `t` ascending.
pub fn enumerate_layouts(n: usize, k: usize) -> Vec<Vec<Slot>> {
    let mut out = Vec::new();
    for t in 0..=k / 2 {
        for pair_positions in subsets(k, 2 * t) {
            let free: Vec<usize> = (0..k).filter(|p| !pair_positions.contains(p)).collect();
            for matching in perfect_matchings(&pair_positions) {
                let mut base = vec![Slot::Vector(0); k];
                for &(a, b) in &matching {
                    base[a] = Slot::PairFirst(b);
                    base[b] = Slot::PairSecond(a);
                }
                let m = free.len();
                let total = n.pow(m as u32);
                for code in 0..total {
                    let mut layout = base.clone();
                    let mut rem = code;
                    for q in (0..m).rev() {
                        layout[free[q]] = Slot::Vector(rem % n);
                        rem /= n;
                    }
                    out.push(layout);
                }
            }
        }
    }
    out
}

fn subsets(n: usize, r: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, r, &mut Vec::new(), &mut out);
    out
}

/// Canonical basis terms for `n` input vectors and output order `k`.
pub fn enumerate_basis_terms(n: usize, k: usize) -> Vec<BasisTerm> {
    enumerate_layouts(n, k)
        .iter()
        .map(|l| BasisTerm::from_layout(l).expect("enumerated layouts are well formed"))
        .collect()
}

/// `Σ_t C(k,2t) (2t-1)!! n^{k-2t}`.
pub fn basis_term_count(n: usize, k: usize) -> usize {
    (0..=k / 2)
        .map(|t| {
            let binom = (0..2 * t).fold(1usize, |acc, i| acc * (k - i) / (i + 1));
            let pairs: usize = (1..2 * t).step_by(2).product();
            binom * pairs * n.pow((k - 2 * t) as u32)
        })
        .sum()
}

fn act_on_layout(layout: &[Slot], h: &Permutation) -> Vec<Slot> {
    // the term's tensor is permuted by h: position p takes the slot at h(p)
    let inv = h.inverse();
    (0..layout.len())
        .map(|p| match layout[h.apply(p)] {
            Slot::Vector(v) => Slot::Vector(v),
            Slot::PairFirst(q) => Slot::PairFirst(inv.apply(q)),
            Slot::PairSecond(q) => Slot::PairSecond(inv.apply(q)),
        })
        .collect()
}

/// A group of output index permutations the model output is required to be
/// invariant under, with terms merged into orbit averages.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputSymmetry {
    perms: Vec<Permutation>,
}

impl OutputSymmetry {
    pub fn new(order: usize, generators: &[Permutation]) -> Result<Self> {
        let sym = crate::basis::IndexSymmetry::from_generators(order, generators)?;
        Ok(Self { perms: sym.elements().to_vec() })
    }

    /// Full symmetry under swapping the two indices of an order-2 output.
    pub fn symmetric_matrix() -> Self {
        Self::new(2, &[Permutation::new(vec![1, 0]).unwrap()]).unwrap()
    }

    pub fn elements(&self) -> &[Permutation] {
        &self.perms
    }

    pub fn order(&self) -> usize {
        self.perms[0].len()
    }

    /// Orbit of a layout, one entry per group element, with pairs reoriented
    /// to put the first `θ` index on the smaller position. The sign is −1 when
    /// an odd number of pairs of an antisymmetric metric were flipped.
    pub fn orbit(&self, layout: &[Slot], antisymmetric: bool) -> Vec<(Vec<Slot>, f64)> {
        self.perms
            .iter()
            .map(|h| orient_pairs(&act_on_layout(layout, h), antisymmetric))
            .collect()
    }
}

fn orient_pairs(layout: &[Slot], antisymmetric: bool) -> (Vec<Slot>, f64) {
    let mut out = layout.to_vec();
    let mut sign = 1.0;
    for p in 0..layout.len() {
        if let Slot::PairSecond(q) = layout[p] {
            if q > p {
                out[p] = Slot::PairFirst(q);
                out[q] = Slot::PairSecond(p);
                if antisymmetric {
                    sign = -sign;
                }
            }
        }
    }
    (out, sign)
}

/// A group of layouts whose term tensors are averaged into one basis term.
#[derive(Debug, Clone, PartialEq)]
pub struct TermGroup {
    pub representative: BasisTerm,
    /// Layouts with their weights (summing to one).
    pub members: Vec<(Vec<Slot>, f64)>,
}

/// Terms for order `k`, optionally merged under `symmetry`.
/// Orbits whose average vanishes are dropped.
pub fn term_groups(
    n: usize,
    k: usize,
    metric: &MetricSignature,
    symmetry: Option<&OutputSymmetry>,
) -> Result<Vec<TermGroup>> {
    let layouts = enumerate_layouts(n, k);
    let Some(sym) = symmetry else {
        return layouts
            .into_iter()
            .map(|l| Ok(TermGroup { representative: BasisTerm::from_layout(&l)?, members: vec![(l, 1.0)] }))
            .collect();
    };
    if sym.order() != k {
        return Err(Error::OrderMismatch { expected: k, got: sym.order() });
    }
    let mut seen = std::collections::HashSet::new();
    let mut groups = Vec::new();
    for l in layouts {
        if seen.contains(&l) {
            continue;
        }
        let orbit = sym.orbit(&l, metric.is_symplectic());
        let w = 1.0 / orbit.len() as f64;
        let mut members: Vec<(Vec<Slot>, f64)> = Vec::new();
        for (o, sign) in orbit {
            seen.insert(o.clone());
            if let Some(m) = members.iter_mut().find(|(x, _)| *x == o) {
                m.1 += sign * w;
            } else {
                members.push((o, sign * w));
            }
        }
        members.retain(|m| m.1.abs() > 1e-12);
        if !members.is_empty() {
            groups.push(TermGroup { representative: BasisTerm::from_layout(&l)?, members });
        }
    }
    Ok(groups)
}

/// Fast evaluation of a layout into `out` (length `d^k`), scaled by `weight`
/// and accumulated.
pub fn accumulate_layout(layout: &[Slot], vectors: &[&[f64]], pairing: &[(usize, f64)], weight: f64, out: &mut [f64]) {
    let k = layout.len();
    let d = pairing.len();
    if k == 0 {
        out[0] += weight;
        return;
    }
    let mut idx = vec![0usize; k];
    for o in out.iter_mut() {
        let mut v = weight;
        for (p, s) in layout.iter().enumerate() {
            match *s {
                Slot::Vector(j) => v *= vectors[j][idx[p]],
                Slot::PairFirst(q) => {
                    let (partner, sign) = pairing[idx[p]];
                    if partner != idx[q] {
                        v = 0.0;
                        break;
                    }
                    v *= sign;
                }
                Slot::PairSecond(_) => {}
            }
        }
        *o += v;
        for p in (0..k).rev() {
            idx[p] += 1;
            if idx[p] < d {
                break;
            }
            idx[p] = 0;
        }
    }
}

/// `⟨g, layout⟩` for a flat order-`k` tensor `g`.
pub fn project_layout(layout: &[Slot], vectors: &[&[f64]], pairing: &[(usize, f64)], g: &[f64]) -> f64 {
    let k = layout.len();
    let d = pairing.len();
    if k == 0 {
        return g[0];
    }
    let mut idx = vec![0usize; k];
    let mut acc = 0.0;
    for &gv in g {
        let mut v = gv;
        for (p, s) in layout.iter().enumerate() {
            match *s {
                Slot::Vector(j) => v *= vectors[j][idx[p]],
                Slot::PairFirst(q) => {
                    let (partner, sign) = pairing[idx[p]];
                    if partner != idx[q] {
                        v = 0.0;
                        break;
                    }
                    v *= sign;
                }
                Slot::PairSecond(_) => {}
            }
        }
        acc += v;
        for p in (0..k).rev() {
            idx[p] += 1;
            if idx[p] < d {
                break;
            }
            idx[p] = 0;
        }
    }
    acc
}
