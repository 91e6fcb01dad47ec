//! Degree-bounded polynomial equivariant maps between tensors of any order:
//! `(a_1,…,a_n) ↦ contract_K(a_{ℓ_1} ⊗ … ⊗ a_{ℓ_r} ⊗ c)` for isotropic `c`.

use std::fmt;

use crate::basis::{independent_subset, isotropic_basis, IndexSymmetry};
use crate::error::{Error, Result};
use crate::perm::Permutation;
use crate::tensor::{outer_all, MetricSignature, Parity, TensorValue};

/// Largest isotropic order materialized.
pub const MAX_ISOTROPIC_ORDER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorSpec {
    pub order: usize,
    pub parity: Parity,
}

impl TensorSpec {
    pub fn new(order: usize, parity: Parity) -> Self {
        Self { order, parity }
    }
}

/// One basis map.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralMap {
    /// Zero-based input indices `ℓ`, non-decreasing.
    pub inputs: Vec<usize>,
    pub contract_order: usize,
    pub sigma: Permutation,
    pub tensor: TensorValue,
}

impl fmt::Display for GeneralMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l: Vec<String> = self.inputs.iter().map(|i| format!("a{}", i + 1)).collect();
        write!(f, "[{}] c^{}", l.join(" "), self.sigma)
    }
}

/// Non-decreasing sequences of length `r` over `0..n`.
fn multisets(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..r {
        let mut next = Vec::new();
        for m in &out {
            let start = m.last().copied().unwrap_or(0);
            for i in start..n {
                let mut e = m.clone();
                e.push(i);
                next.push(e);
            }
        }
        out = next;
    }
    out
}

/// Swaps of blocks that hold the same input.
fn input_symmetry(specs: &[TensorSpec], ell: &[usize], total_order: usize) -> Result<Option<IndexSymmetry>> {
    let mut gens = Vec::new();
    let mut start = 0;
    let starts: Vec<usize> = ell
        .iter()
        .map(|&l| {
            let s = start;
            start += specs[l].order;
            s
        })
        .collect();
    for i in 1..ell.len() {
        if ell[i] == ell[i - 1] && specs[ell[i]].order > 0 {
            let len = specs[ell[i]].order;
            let mut images: Vec<usize> = (0..total_order).collect();
            for t in 0..len {
                images.swap(starts[i - 1] + t, starts[i] + t);
            }
            gens.push(Permutation::new(images)?);
        }
    }
    if gens.is_empty() {
        return Ok(None);
    }
    IndexSymmetry::from_generators(total_order, &gens).map(Some)
}

/// Euclidean basis maps for polynomial degree at most `degree`.
///
/// With `dedup`, elements that induce the same map on the symmetric product
/// of repeated inputs, or that are linearly dependent, are dropped.
pub fn enumerate_general_basis(
    inputs: &[TensorSpec],
    output: TensorSpec,
    degree: usize,
    metric: &MetricSignature,
    dedup: bool,
) -> Result<Vec<GeneralMap>> {
    if !metric.is_euclidean() {
        return Err(Error::Unsupported(format!("general basis for {metric}")));
    }
    let mut maps = Vec::new();
    for r in 0..=degree {
        for ell in multisets(inputs.len(), r) {
            let k_in: usize = ell.iter().map(|&l| inputs[l].order).sum();
            let parity = ell.iter().fold(output.parity, |p, &l| p.mul(inputs[l].parity));
            let total = k_in + output.order;
            if total > MAX_ISOTROPIC_ORDER {
                let names: Vec<String> = ell.iter().map(|l| format!("a{}", l + 1)).collect();
                return Err(Error::OrderBound(format!(
                    "term [{}] needs an isotropic tensor of order {total} > {MAX_ISOTROPIC_ORDER}",
                    names.join(" ")
                )));
            }
            let mut basis = isotropic_basis(total, parity, metric)?;
            if basis.is_empty() {
                continue;
            }
            if dedup {
                let sym = input_symmetry(inputs, &ell, total)?;
                basis = independent_subset(&basis, sym.as_ref())?;
            }
            for e in basis.elements {
                maps.push(GeneralMap { inputs: ell.clone(), contract_order: k_in, sigma: e.sigma, tensor: e.tensor });
            }
        }
    }
    Ok(maps)
}

/// Evaluates one basis map on the inputs.
pub fn apply_general_basis(map: &GeneralMap, inputs: &[TensorValue]) -> Result<TensorValue> {
    let d = map.tensor.dim();
    let mut factors = Vec::with_capacity(map.inputs.len() + 1);
    let mut k_in = 0;
    for &l in &map.inputs {
        let a = inputs
            .get(l)
            .ok_or_else(|| Error::InvalidArgument(format!("map uses input a{} but only {} given", l + 1, inputs.len())))?;
        if a.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: a.dim() });
        }
        k_in += a.order();
        factors.push(a);
    }
    if k_in != map.contract_order {
        return Err(Error::OrderMismatch { expected: map.contract_order, got: k_in });
    }
    factors.push(&map.tensor);
    outer_all(d, &factors)?.contract(k_in, &MetricSignature::euclidean(d)?)
}

/// `Σ β_i map_i(inputs)`.
pub fn apply_combination(maps: &[GeneralMap], beta: &[f64], inputs: &[TensorValue]) -> Result<TensorValue> {
    if maps.len() != beta.len() || maps.is_empty() {
        return Err(Error::BadLength { expected: maps.len(), got: beta.len() });
    }
    let mut acc = apply_general_basis(&maps[0], inputs)?.scale(beta[0])?;
    for (m, b) in maps.iter().zip(beta).skip(1) {
        acc.axpy(*b, &apply_general_basis(m, inputs)?)?;
    }
    Ok(acc)
}
