use rand::Rng;

use crate::error::{Error, Result};

/// Linear map on all monomials of the inputs up to a fixed degree.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialNet {
    inputs: usize,
    outputs: usize,
    degree: usize,
    monomials: Vec<Vec<usize>>,
    /// `outputs × monomials`, row-major.
    params: Vec<f64>,
}

fn monomials(inputs: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..degree {
        let mut next = Vec::new();
        for m in &frontier {
            let start = m.last().copied().unwrap_or(0);
            for i in start..inputs {
                let mut e = m.clone();
                e.push(i);
                next.push(e);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

impl PolynomialNet {
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, degree: usize, rng: &mut R) -> Self {
        let monomials = monomials(inputs, degree);
        let limit = 1.0 / (monomials.len() as f64).sqrt();
        let params = (0..outputs * monomials.len()).map(|_| rng.random_range(-limit..limit)).collect();
        Self { inputs, outputs, degree, monomials, params }
    }

    pub fn from_params(inputs: usize, outputs: usize, degree: usize, params: Vec<f64>) -> Result<Self> {
        let monomials = monomials(inputs, degree);
        let expected = outputs * monomials.len();
        if params.len() != expected {
            return Err(Error::BadLength { expected, got: params.len() });
        }
        Ok(Self { inputs, outputs, degree, monomials, params })
    }

    pub fn input_dim(&self) -> usize {
        self.inputs
    }

    pub fn output_dim(&self) -> usize {
        self.outputs
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_monomials(&self) -> usize {
        self.monomials.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn monomial_values(&self, x: &[f64]) -> Vec<f64> {
        self.monomials.iter().map(|m| m.iter().map(|&i| x[i]).product()).collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.inputs {
            return Err(Error::DimensionMismatch { expected: self.inputs, got: x.len() });
        }
        let m = self.monomial_values(x);
        let width = m.len();
        Ok((0..self.outputs)
            .map(|o| self.params[o * width..(o + 1) * width].iter().zip(&m).map(|(w, v)| w * v).sum())
            .collect())
    }

    /// Adds the parameter gradient for one sample into `grads`.
    pub fn accumulate_gradient(&self, x: &[f64], dy: &[f64], grads: &mut [f64]) {
        let m = self.monomial_values(x);
        let width = m.len();
        for (o, g) in dy.iter().enumerate() {
            for (k, v) in m.iter().enumerate() {
                grads[o * width + k] += g * v;
            }
        }
    }
}
