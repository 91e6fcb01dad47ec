use nalgebra::{DMatrix, RowDVector};
use rand::Rng;

use super::Activation;
use crate::error::{Error, Result};

/// Stack of permutation-equivariant layers on sets of feature rows:
/// `Y = X W_self + 1 mean(X) W_mean + 1 bᵀ`.
///
/// Parameters per layer, flat: `W_self` (in × out, row-major), `W_mean`
/// (in × out, row-major), then the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct PermEquivariantNet {
    channels: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PermCache {
    inputs: Vec<DMatrix<f64>>,
    pre: Vec<DMatrix<f64>>,
}

pub fn perm_param_count(channels: &[usize]) -> usize {
    channels.windows(2).map(|w| 2 * w[0] * w[1] + w[1]).sum()
}

fn mean_rows(x: &DMatrix<f64>) -> RowDVector<f64> {
    x.row_sum() / x.nrows() as f64
}

impl PermEquivariantNet {
    pub fn new<R: Rng + ?Sized>(channels: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        if channels.len() < 2 || channels.contains(&0) {
            return Err(Error::InvalidArgument(format!("bad channel widths {channels:?}")));
        }
        let mut params = Vec::with_capacity(perm_param_count(channels));
        for w in channels.windows(2) {
            let limit = (6.0 / (2 * w[0] + w[1]) as f64).sqrt();
            for _ in 0..2 * w[0] * w[1] {
                params.push(rng.random_range(-limit..limit));
            }
            params.extend(std::iter::repeat_n(0.0, w[1]));
        }
        Ok(Self { channels: channels.to_vec(), activation, params })
    }

    pub fn from_params(channels: &[usize], activation: Activation, params: Vec<f64>) -> Result<Self> {
        let expected = perm_param_count(channels);
        if channels.len() < 2 || params.len() != expected {
            return Err(Error::BadLength { expected, got: params.len() });
        }
        Ok(Self { channels: channels.to_vec(), activation, params })
    }

    pub fn channels(&self) -> &[usize] {
        &self.channels
    }

    pub fn activation(&self) -> Activation {
        self.activation
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

    fn layer(&self, l: usize) -> (DMatrix<f64>, DMatrix<f64>, RowDVector<f64>) {
        let start = perm_param_count(&self.channels[..=l]);
        let (i, o) = (self.channels[l], self.channels[l + 1]);
        let w_self = DMatrix::from_row_slice(i, o, &self.params[start..start + i * o]);
        let w_mean = DMatrix::from_row_slice(i, o, &self.params[start + i * o..start + 2 * i * o]);
        let b = RowDVector::from_row_slice(&self.params[start + 2 * i * o..start + 2 * i * o + o]);
        (w_self, w_mean, b)
    }

    /// `x` holds one set element per row.
    pub fn forward_set(&self, x: &DMatrix<f64>) -> Result<(DMatrix<f64>, PermCache)> {
        if x.ncols() != self.channels[0] || x.nrows() == 0 {
            return Err(Error::DimensionMismatch { expected: self.channels[0], got: x.ncols() });
        }
        let layers = self.channels.len() - 1;
        let mut inputs = Vec::with_capacity(layers);
        let mut pre = Vec::with_capacity(layers);
        let mut a = x.clone();
        for l in 0..layers {
            let (w_self, w_mean, b) = self.layer(l);
            let pooled = mean_rows(&a) * w_mean + b;
            let mut z = &a * w_self;
            for mut row in z.row_iter_mut() {
                row += &pooled;
            }
            inputs.push(a);
            a = if l + 1 < layers { z.map(|v| self.activation.apply(v)) } else { z.clone() };
            pre.push(z);
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("permutation-equivariant forward"));
        }
        Ok((a, PermCache { inputs, pre }))
    }

    /// Single-channel convenience: a vector in, a vector out.
    pub fn forward_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (y, _) = self.forward_set(&DMatrix::from_column_slice(x.len(), 1, x))?;
        if y.ncols() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: y.ncols() });
        }
        Ok(y.iter().cloned().collect())
    }

    /// Returns the parameter gradient and the input gradient.
    pub fn backward_set(&self, cache: &PermCache, dy: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let layers = self.channels.len() - 1;
        let n = cache.inputs[0].nrows();
        if dy.nrows() != n || dy.ncols() != *self.channels.last().unwrap() {
            return Err(Error::DimensionMismatch { expected: *self.channels.last().unwrap(), got: dy.ncols() });
        }
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = dy.clone();
        for l in (0..layers).rev() {
            if l + 1 < layers {
                delta.zip_apply(&cache.pre[l], |d, z| *d *= self.activation.derivative(z));
            }
            let (w_self, w_mean, _) = self.layer(l);
            let (i, o) = (self.channels[l], self.channels[l + 1]);
            let start = perm_param_count(&self.channels[..=l]);
            let a = &cache.inputs[l];
            let d_self = a.transpose() * &delta;
            let delta_sum = delta.row_sum();
            let d_mean = mean_rows(a).transpose() * &delta_sum;
            for r in 0..i {
                for c in 0..o {
                    grads[start + r * o + c] = d_self[(r, c)];
                    grads[start + i * o + r * o + c] = d_mean[(r, c)];
                }
            }
            for c in 0..o {
                grads[start + 2 * i * o + c] = delta_sum[c];
            }
            let through_mean = (&delta_sum * w_mean.transpose()) / n as f64;
            let mut next = &delta * w_self.transpose();
            for mut row in next.row_iter_mut() {
                row += &through_mean;
            }
            delta = next;
        }
        Ok((grads, delta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian_matrix;
    use crate::nn::gradient_check;
    use crate::rng::seeded;
    use rand::seq::SliceRandom;

    #[test]
    fn param_count_matches_architecture() {
        assert_eq!(perm_param_count(&[1, 23, 23, 23, 1]), 2_278);
    }

    #[test]
    fn equivariant_under_row_permutations() {
        let mut rng = seeded(4);
        let net = PermEquivariantNet::new(&[2, 7, 7, 3], Activation::Gelu, &mut rng).unwrap();
        let x = gaussian_matrix(&mut rng, 5, 2);
        let (y, _) = net.forward_set(&x).unwrap();
        for _ in 0..100 {
            let mut order: Vec<usize> = (0..5).collect();
            order.shuffle(&mut rng);
            let px = x.select_rows(&order);
            let (py, _) = net.forward_set(&px).unwrap();
            assert!((py - y.select_rows(&order)).abs().max() < 1e-12);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = seeded(5);
        let ch = [1, 6, 6, 1];
        let net = PermEquivariantNet::new(&ch, Activation::Gelu, &mut rng).unwrap();
        let x = gaussian_matrix(&mut rng, 3, 1);
        let t = gaussian_matrix(&mut rng, 3, 1);
        let loss = |p: &[f64]| {
            let n = PermEquivariantNet::from_params(&ch, Activation::Gelu, p.to_vec()).unwrap();
            0.5 * (n.forward_set(&x).unwrap().0 - &t).norm_squared()
        };
        let (y, cache) = net.forward_set(&x).unwrap();
        let (g, dx) = net.backward_set(&cache, &(y - &t)).unwrap();
        assert!(gradient_check(loss, net.params(), &g, 1e-5) < 1e-5);
        let f = |v: &[f64]| 0.5 * (net.forward_vec(v).unwrap().iter().zip(t.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>());
        assert!(gradient_check(f, x.as_slice(), dx.as_slice(), 1e-5) < 1e-5);
    }
}
