use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::Activation;
use crate::error::{Error, Result};

/// Fully connected network with the activation on hidden layers only.
///
/// Parameters are one flat vector: per layer the `out × in` weights
/// row-major, then the `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    widths: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct DenseCache {
    inputs: Vec<DMatrix<f64>>,
    pre: Vec<DMatrix<f64>>,
}

pub fn dense_param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl DenseNet {
    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidArgument(format!("bad layer widths {widths:?}")));
        }
        let mut params = Vec::with_capacity(dense_param_count(widths));
        for w in widths.windows(2) {
            let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
            for _ in 0..w[0] * w[1] {
                params.push(rng.random_range(-limit..limit));
            }
            params.extend(std::iter::repeat_n(0.0, w[1]));
        }
        Ok(Self { widths: widths.to_vec(), activation, params })
    }

    pub fn from_params(widths: &[usize], activation: Activation, params: Vec<f64>) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidArgument(format!("bad layer widths {widths:?}")));
        }
        let expected = dense_param_count(widths);
        if params.len() != expected {
            return Err(Error::BadLength { expected, got: params.len() });
        }
        Ok(Self { widths: widths.to_vec(), activation, params })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layer(&self, l: usize) -> (DMatrix<f64>, DVector<f64>) {
        let start: usize = dense_param_count(&self.widths[..=l]);
        let (i, o) = (self.widths[l], self.widths[l + 1]);
        let w = DMatrix::from_row_slice(o, i, &self.params[start..start + o * i]);
        let b = DVector::from_column_slice(&self.params[start + o * i..start + o * i + o]);
        (w, b)
    }

    /// Forward pass on a batch with one sample per row.
    pub fn forward_batch(&self, x: &DMatrix<f64>) -> Result<(DMatrix<f64>, DenseCache)> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.ncols() });
        }
        let layers = self.widths.len() - 1;
        let mut inputs = Vec::with_capacity(layers);
        let mut pre = Vec::with_capacity(layers);
        let mut a = x.clone();
        for l in 0..layers {
            let (w, b) = self.layer(l);
            let mut z = &a * w.transpose();
            for mut row in z.row_iter_mut() {
                row += b.transpose();
            }
            inputs.push(a);
            a = if l + 1 < layers { z.map(|v| self.activation.apply(v)) } else { z.clone() };
            pre.push(z);
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dense network forward"));
        }
        Ok((a, DenseCache { inputs, pre }))
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (y, _) = self.forward_batch(&DMatrix::from_row_slice(1, x.len(), x))?;
        Ok(y.iter().cloned().collect())
    }

    /// Reverse pass. Returns the parameter gradient (summed over the batch)
    /// and the gradient with respect to the input batch.
    pub fn backward_batch(&self, cache: &DenseCache, dy: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let layers = self.widths.len() - 1;
        if dy.ncols() != self.output_dim() || dy.nrows() != cache.inputs[0].nrows() {
            return Err(Error::DimensionMismatch { expected: self.output_dim(), got: dy.ncols() });
        }
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = dy.clone();
        for l in (0..layers).rev() {
            if l + 1 < layers {
                delta.zip_apply(&cache.pre[l], |d, z| *d *= self.activation.derivative(z));
            }
            let (w, _) = self.layer(l);
            let (i, o) = (self.widths[l], self.widths[l + 1]);
            let start = dense_param_count(&self.widths[..=l]);
            let dw = delta.transpose() * &cache.inputs[l];
            for r in 0..o {
                for c in 0..i {
                    grads[start + r * i + c] = dw[(r, c)];
                }
                grads[start + o * i + r] = delta.column(r).sum();
            }
            delta = &delta * w;
        }
        Ok((grads, delta))
    }
}
