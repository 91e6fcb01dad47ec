//! Equivariant maps from `n` vectors to tensors with invariant coefficients.

use nalgebra::DMatrix;
use rand::Rng;

use super::terms::{accumulate_layout, project_layout, term_groups, OutputSymmetry, Slot, TermGroup};
use crate::error::{Error, Result};
use crate::nn::{Activation, DenseCache, DenseNet, PolynomialNet};
use crate::tensor::{MetricSignature, Parity, TensorValue};

/// `n × n` matrix of pairwise metric inner products.
pub fn invariant_features(vectors: &[TensorValue], metric: &MetricSignature) -> Result<DMatrix<f64>> {
    for v in vectors {
        if v.order() != 1 {
            return Err(Error::OrderMismatch { expected: 1, got: v.order() });
        }
        if v.dim() != metric.dim() {
            return Err(Error::DimensionMismatch { expected: metric.dim(), got: v.dim() });
        }
    }
    let n = vectors.len();
    Ok(DMatrix::from_fn(n, n, |i, j| metric.form(vectors[i].components(), vectors[j].components())))
}

/// Which invariants the coefficient network sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMode {
    /// Upper triangle with diagonal of the Gram matrix (the full matrix for
    /// antisymmetric forms).
    Gram,
    /// Only the squared norms `⟨v_i, v_i⟩`.
    Norms,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoeffNetSpec {
    Dense { hidden: Vec<usize>, activation: Activation },
    Polynomial { degree: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoeffNet {
    Dense(DenseNet),
    Polynomial(PolynomialNet),
}

impl CoeffNet {
    pub fn build<R: Rng + ?Sized>(spec: &CoeffNetSpec, inputs: usize, outputs: usize, rng: &mut R) -> Result<Self> {
        Ok(match spec {
            CoeffNetSpec::Dense { hidden, activation } => {
                let mut widths = vec![inputs];
                widths.extend(hidden);
                widths.push(outputs);
                CoeffNet::Dense(DenseNet::new(&widths, *activation, rng)?)
            }
            CoeffNetSpec::Polynomial { degree } => CoeffNet::Polynomial(PolynomialNet::new(inputs, outputs, *degree, rng)),
        })
    }

    pub fn input_dim(&self) -> usize {
        match self {
            CoeffNet::Dense(n) => n.input_dim(),
            CoeffNet::Polynomial(p) => p.input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            CoeffNet::Dense(n) => n.output_dim(),
            CoeffNet::Polynomial(p) => p.output_dim(),
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            CoeffNet::Dense(n) => n.params(),
            CoeffNet::Polynomial(p) => p.params(),
        }
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        match self {
            CoeffNet::Dense(n) => n.params_mut(),
            CoeffNet::Polynomial(p) => p.params_mut(),
        }
    }

    fn forward_batch(&self, x: &DMatrix<f64>) -> Result<(DMatrix<f64>, Option<DenseCache>)> {
        match self {
            CoeffNet::Dense(n) => {
                let (y, c) = n.forward_batch(x)?;
                Ok((y, Some(c)))
            }
            CoeffNet::Polynomial(p) => {
                let mut y = DMatrix::zeros(x.nrows(), p.output_dim());
                for r in 0..x.nrows() {
                    let row: Vec<f64> = x.row(r).iter().cloned().collect();
                    for (c, v) in p.forward(&row)?.into_iter().enumerate() {
                        y[(r, c)] = v;
                    }
                }
                Ok((y, None))
            }
        }
    }

    fn backward_batch(&self, x: &DMatrix<f64>, cache: &Option<DenseCache>, dy: &DMatrix<f64>) -> Result<Vec<f64>> {
        match (self, cache) {
            (CoeffNet::Dense(n), Some(c)) => Ok(n.backward_batch(c, dy)?.0),
            (CoeffNet::Polynomial(p), _) => {
                let mut g = vec![0.0; p.params().len()];
                for r in 0..x.nrows() {
                    let row: Vec<f64> = x.row(r).iter().cloned().collect();
                    let d: Vec<f64> = dy.row(r).iter().cloned().collect();
                    p.accumulate_gradient(&row, &d, &mut g);
                }
                Ok(g)
            }
            _ => Err(Error::InvalidArgument("missing network cache".into())),
        }
    }
}

/// Model construction options.
#[derive(Debug, Clone, PartialEq)]
pub struct VecModelOptions {
    pub n: usize,
    pub metric: MetricSignature,
    /// One output head per order, sharing one coefficient network.
    pub orders: Vec<usize>,
    /// Average order-2 terms under index transposition.
    pub symmetric_output: bool,
    /// Keep only `v_i ⊗ v_i` and `θ` terms.
    pub diagonal_terms_only: bool,
    pub features: FeatureMode,
    /// Gram entries are multiplied by this before entering the network.
    pub feature_scale: f64,
    pub net: CoeffNetSpec,
}

impl VecModelOptions {
    pub fn new(n: usize, metric: MetricSignature, orders: Vec<usize>, net: CoeffNetSpec) -> Self {
        let d = metric.dim();
        Self {
            n,
            metric,
            orders,
            symmetric_output: false,
            diagonal_terms_only: false,
            features: FeatureMode::Gram,
            feature_scale: 1.0 / d as f64,
            net,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputHead {
    pub order: usize,
    pub groups: Vec<TermGroup>,
    /// Index of this head's first coefficient.
    pub offset: usize,
}

/// Sum over basis terms with coefficients produced from invariant features
/// by a shared network.
#[derive(Debug, Clone, PartialEq)]
pub struct VecToTensorModel {
    options: VecModelOptions,
    heads: Vec<OutputHead>,
    net: CoeffNet,
    pairing: Vec<(usize, f64)>,
}

/// Values kept between a batch forward and backward pass.
#[derive(Debug, Clone)]
pub struct VecBatchCache {
    features: DMatrix<f64>,
    net: Option<DenseCache>,
}

fn is_diagonal_term(layout: &[Slot]) -> bool {
    match layout {
        [Slot::Vector(a), Slot::Vector(b)] => a == b,
        _ => layout.iter().all(|s| !matches!(s, Slot::Vector(_))),
    }
}

pub fn feature_count(n: usize, metric: &MetricSignature, mode: FeatureMode) -> usize {
    match mode {
        FeatureMode::Norms => n,
        FeatureMode::Gram if metric.is_symplectic() => n * n,
        FeatureMode::Gram => n * (n + 1) / 2,
    }
}

impl VecToTensorModel {
    pub fn new<R: Rng + ?Sized>(options: VecModelOptions, rng: &mut R) -> Result<Self> {
        let heads = Self::build_heads(&options)?;
        let outputs: usize = heads.iter().map(|h| h.groups.len()).sum();
        let inputs = feature_count(options.n, &options.metric, options.features);
        let net = CoeffNet::build(&options.net, inputs, outputs, rng)?;
        Self::from_parts(options, net)
    }

    /// Rebuilds a model around an existing network, e.g. from a checkpoint.
    pub fn from_parts(options: VecModelOptions, net: CoeffNet) -> Result<Self> {
        let heads = Self::build_heads(&options)?;
        let outputs: usize = heads.iter().map(|h| h.groups.len()).sum();
        let inputs = feature_count(options.n, &options.metric, options.features);
        if net.output_dim() != outputs || net.input_dim() != inputs {
            return Err(Error::DimensionMismatch { expected: outputs, got: net.output_dim() });
        }
        let pairing = (0..options.metric.dim()).map(|i| options.metric.pairing(i)).collect();
        Ok(Self { options, heads, net, pairing })
    }

    fn build_heads(options: &VecModelOptions) -> Result<Vec<OutputHead>> {
        if options.n == 0 {
            return Err(Error::InvalidArgument("model needs at least one input vector".into()));
        }
        if options.orders.is_empty() {
            return Err(Error::InvalidArgument("model needs at least one output order".into()));
        }
        let mut heads = Vec::new();
        let mut offset = 0;
        for &order in &options.orders {
            let sym = if options.symmetric_output && order == 2 { Some(OutputSymmetry::symmetric_matrix()) } else { None };
            let mut groups = term_groups(options.n, order, &options.metric, sym.as_ref())?;
            if options.diagonal_terms_only {
                groups.retain(|g| g.members.iter().all(|(l, _)| is_diagonal_term(l)));
            }
            let count = groups.len();
            heads.push(OutputHead { order, groups, offset });
            offset += count;
        }
        Ok(heads)
    }

    pub fn options(&self) -> &VecModelOptions {
        &self.options
    }

    pub fn heads(&self) -> &[OutputHead] {
        &self.heads
    }

    pub fn net(&self) -> &CoeffNet {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut CoeffNet {
        &mut self.net
    }

    pub fn num_terms(&self) -> usize {
        self.heads.iter().map(|h| h.groups.len()).sum()
    }

    pub fn num_params(&self) -> usize {
        self.net.params().len()
    }

    pub fn params(&self) -> &[f64] {
        self.net.params()
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        self.net.params_mut()
    }

    pub fn dim(&self) -> usize {
        self.options.metric.dim()
    }

    /// Network input for one sample given as `n·d` packed components.
    pub fn features_raw(&self, sample: &[f64]) -> Result<Vec<f64>> {
        let (n, d) = (self.options.n, self.dim());
        if sample.len() != n * d {
            return Err(Error::BadLength { expected: n * d, got: sample.len() });
        }
        let m = &self.options.metric;
        let v = |i: usize| &sample[i * d..(i + 1) * d];
        let s = self.options.feature_scale;
        let mut out = Vec::with_capacity(feature_count(n, m, self.options.features));
        match self.options.features {
            FeatureMode::Norms => {
                for i in 0..n {
                    out.push(s * m.form(v(i), v(i)));
                }
            }
            FeatureMode::Gram if m.is_symplectic() => {
                for i in 0..n {
                    for j in 0..n {
                        out.push(s * m.form(v(i), v(j)));
                    }
                }
            }
            FeatureMode::Gram => {
                for i in 0..n {
                    for j in i..n {
                        out.push(s * m.form(v(i), v(j)));
                    }
                }
            }
        }
        Ok(out)
    }

    fn pack(&self, vectors: &[TensorValue]) -> Result<Vec<f64>> {
        if vectors.len() != self.options.n {
            return Err(Error::InvalidArgument(format!("expected {} vectors, got {}", self.options.n, vectors.len())));
        }
        let mut out = Vec::with_capacity(self.options.n * self.dim());
        for v in vectors {
            if v.order() != 1 || v.dim() != self.dim() {
                return Err(Error::DimensionMismatch { expected: self.dim(), got: v.dim() });
            }
            out.extend_from_slice(v.components());
        }
        Ok(out)
    }

    /// Coefficients for every term of every head.
    pub fn coefficients(&self, vectors: &[TensorValue]) -> Result<Vec<f64>> {
        let sample = self.pack(vectors)?;
        let x = DMatrix::from_row_slice(1, self.net.input_dim(), &self.features_raw(&sample)?);
        Ok(self.net.forward_batch(&x)?.0.iter().cloned().collect())
    }

    /// Combines given coefficients with the basis terms evaluated on `sample`.
    pub fn combine_raw(&self, sample: &[f64], coeffs: &[f64]) -> Vec<Vec<f64>> {
        let d = self.dim();
        let vs: Vec<&[f64]> = sample.chunks(d).collect();
        self.heads
            .iter()
            .map(|h| {
                let mut out = vec![0.0; d.pow(h.order as u32)];
                for (gi, g) in h.groups.iter().enumerate() {
                    let c = coeffs[h.offset + gi];
                    if c == 0.0 {
                        continue;
                    }
                    for (layout, w) in &g.members {
                        accumulate_layout(layout, &vs, &self.pairing, c * w, &mut out);
                    }
                }
                out
            })
            .collect()
    }

    /// `⟨g_h, B_t⟩` for every term, given per-head output gradients.
    pub fn project_raw(&self, sample: &[f64], grads: &[Vec<f64>]) -> Vec<f64> {
        let d = self.dim();
        let vs: Vec<&[f64]> = sample.chunks(d).collect();
        let mut out = vec![0.0; self.num_terms()];
        for (h, g) in self.heads.iter().zip(grads) {
            for (gi, group) in h.groups.iter().enumerate() {
                out[h.offset + gi] = group
                    .members
                    .iter()
                    .map(|(layout, w)| w * project_layout(layout, &vs, &self.pairing, g))
                    .sum();
            }
        }
        out
    }

    /// One output tensor per head.
    pub fn forward(&self, vectors: &[TensorValue]) -> Result<Vec<TensorValue>> {
        let sample = self.pack(vectors)?;
        let (mut out, _) = self.forward_batch(&[&sample])?;
        let d = self.dim();
        out.remove(0)
            .into_iter()
            .zip(&self.heads)
            .map(|(data, h)| TensorValue::new(d, h.order, Parity::Even, data))
            .collect()
    }

    /// Outputs indexed `[sample][head]`, flat row-major tensors.
    pub fn forward_batch(&self, batch: &[&[f64]]) -> Result<(Vec<Vec<Vec<f64>>>, VecBatchCache)> {
        let width = self.net.input_dim();
        let mut features = DMatrix::zeros(batch.len(), width);
        for (r, s) in batch.iter().enumerate() {
            for (c, v) in self.features_raw(s)?.into_iter().enumerate() {
                features[(r, c)] = v;
            }
        }
        let (coeffs, net_cache) = self.net.forward_batch(&features)?;
        let mut outs = Vec::with_capacity(batch.len());
        for (r, s) in batch.iter().enumerate() {
            let c: Vec<f64> = coeffs.row(r).iter().cloned().collect();
            let o = self.combine_raw(s, &c);
            if o.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("vectors-to-tensor forward"));
            }
            outs.push(o);
        }
        Ok((outs, VecBatchCache { features, net: net_cache }))
    }

    /// Parameter gradient given `d_out[sample][head]`.
    pub fn backward_batch(&self, batch: &[&[f64]], cache: &VecBatchCache, d_out: &[Vec<Vec<f64>>]) -> Result<Vec<f64>> {
        if d_out.len() != batch.len() {
            return Err(Error::BadLength { expected: batch.len(), got: d_out.len() });
        }
        let mut dc = DMatrix::zeros(batch.len(), self.num_terms());
        for (r, (s, g)) in batch.iter().zip(d_out).enumerate() {
            for (c, v) in self.project_raw(s, g).into_iter().enumerate() {
                dc[(r, c)] = v;
            }
        }
        self.net.backward_batch(&cache.features, &cache.net, &dc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{group_act, sample_group};
    use crate::models::terms::basis_term_count;
    use crate::nn::gradient_check;
    use crate::rng::seeded;
    use crate::tensor::kronecker_delta;
    use rand_distr::{Distribution, StandardNormal};

    fn random_vectors(n: usize, d: usize, rng: &mut impl Rng) -> Vec<TensorValue> {
        (0..n)
            .map(|_| {
                let c: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
                TensorValue::vector(&c).unwrap()
            })
            .collect()
    }

    fn dense(h: usize) -> CoeffNetSpec {
        CoeffNetSpec::Dense { hidden: vec![h, h], activation: Activation::Gelu }
    }

    #[test]
    fn features_of_orthonormal_basis() {
        let e3 = MetricSignature::euclidean(3).unwrap();
        let vs: Vec<TensorValue> = (0..3).map(|i| TensorValue::basis_vector(3, i).unwrap()).collect();
        assert_eq!(invariant_features(&vs, &e3).unwrap(), DMatrix::identity(3, 3));
        let null = TensorValue::vector(&[1.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(invariant_features(&[null], &MetricSignature::lorentz()).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn features_are_invariant() {
        let mut rng = seeded(20);
        for m in [MetricSignature::euclidean(3).unwrap(), MetricSignature::lorentz(), MetricSignature::symplectic(4).unwrap()] {
            let vs = random_vectors(4, m.dim(), &mut rng);
            let g = sample_group(&m, &mut rng).unwrap();
            let moved: Vec<TensorValue> = vs.iter().map(|v| group_act(&g, v).unwrap()).collect();
            let a = invariant_features(&vs, &m).unwrap();
            let b = invariant_features(&moved, &m).unwrap();
            assert!((a - b).abs().max() < 1e-10 * (1.0 + g.matrix().abs().max().powi(2)));
        }
    }

    #[test]
    fn term_counts_and_param_count() {
        let mut rng = seeded(21);
        let opts = VecModelOptions::new(
            10,
            MetricSignature::euclidean(3).unwrap(),
            vec![1, 2, 3],
            CoeffNetSpec::Dense { hidden: vec![32, 32, 32], activation: Activation::Gelu },
        );
        let m = VecToTensorModel::new(opts, &mut rng).unwrap();
        assert_eq!(m.num_terms(), 1141);
        assert_eq!(m.num_params(), 41_557);
        assert_eq!(basis_term_count(4, 2), 17);
    }

    #[test]
    fn zero_network_gives_zero_output() {
        let mut rng = seeded(22);
        let opts = VecModelOptions::new(2, MetricSignature::euclidean(3).unwrap(), vec![2], dense(4));
        let mut m = VecToTensorModel::new(opts, &mut rng).unwrap();
        m.params_mut().iter_mut().for_each(|p| *p = 0.0);
        let out = m.forward(&random_vectors(2, 3, &mut rng)).unwrap();
        assert_eq!(out[0].norm(), 0.0);
    }

    #[test]
    fn constant_coefficient_on_the_metric_term() {
        let mut rng = seeded(23);
        let opts = VecModelOptions::new(1, MetricSignature::euclidean(3).unwrap(), vec![2], CoeffNetSpec::Polynomial { degree: 0 });
        let mut m = VecToTensorModel::new(opts, &mut rng).unwrap();
        let delta_term = m.heads()[0].groups.iter().position(|g| g.representative.t == 1).unwrap();
        let p = m.params_mut();
        p.iter_mut().for_each(|x| *x = 0.0);
        p[delta_term] = 1.0;
        let out = m.forward(&random_vectors(1, 3, &mut rng)).unwrap();
        assert_eq!(out[0], kronecker_delta(3).unwrap());
    }

    #[test]
    fn equivariance_for_all_metrics() {
        let mut rng = seeded(24);
        for m in [MetricSignature::euclidean(3).unwrap(), MetricSignature::lorentz(), MetricSignature::symplectic(4).unwrap()] {
            let opts = VecModelOptions::new(3, m, vec![1, 2, 3], dense(8));
            let model = VecToTensorModel::new(opts, &mut rng).unwrap();
            for _ in 0..4 {
                let vs = random_vectors(3, m.dim(), &mut rng);
                let g = sample_group(&m, &mut rng).unwrap();
                let moved: Vec<TensorValue> = vs.iter().map(|v| group_act(&g, v).unwrap()).collect();
                let lhs = model.forward(&moved).unwrap();
                let rhs: Vec<TensorValue> = model.forward(&vs).unwrap().iter().map(|t| group_act(&g, t).unwrap()).collect();
                for (a, b) in lhs.iter().zip(&rhs) {
                    let defect = a.distance(b).unwrap() / (1.0 + b.norm());
                    assert!(defect < 1e-7, "{m}: {defect}");
                }
            }
        }
    }

    #[test]
    fn fast_path_matches_term_tensors() {
        let mut rng = seeded(25);
        let m = MetricSignature::symplectic(2).unwrap();
        let opts = VecModelOptions::new(2, m, vec![2, 3], dense(5));
        let model = VecToTensorModel::new(opts, &mut rng).unwrap();
        let vs = random_vectors(2, 2, &mut rng);
        let coeffs = model.coefficients(&vs).unwrap();
        let out = model.forward(&vs).unwrap();
        for (h, o) in model.heads().iter().zip(&out) {
            let mut expect = TensorValue::zeros(2, h.order, Parity::Even).unwrap();
            for (gi, g) in h.groups.iter().enumerate() {
                expect.axpy(coeffs[h.offset + gi], &g.representative.evaluate(&vs, &m).unwrap()).unwrap();
            }
            assert!(o.max_abs_diff(&expect).unwrap() < 1e-12);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = seeded(26);
        let opts = VecModelOptions::new(3, MetricSignature::euclidean(3).unwrap(), vec![1, 2], dense(6));
        let model = VecToTensorModel::new(opts.clone(), &mut rng).unwrap();
        let samples: Vec<Vec<f64>> = (0..4).map(|_| (0..9).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
        let targets: Vec<Vec<Vec<f64>>> = samples.iter().map(|_| vec![(0..3).map(|i| i as f64 * 0.1).collect(), vec![0.2; 9]]).collect();
        let batch: Vec<&[f64]> = samples.iter().map(|s| s.as_slice()).collect();
        let loss = |p: &[f64]| {
            let mut m = model.clone();
            m.params_mut().copy_from_slice(p);
            let (out, _) = m.forward_batch(&batch).unwrap();
            let mut l = 0.0;
            for (o, t) in out.iter().zip(&targets) {
                for (a, b) in o.iter().zip(t) {
                    l += 0.5 * a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
                }
            }
            l
        };
        let (out, cache) = model.forward_batch(&batch).unwrap();
        let d_out: Vec<Vec<Vec<f64>>> = out
            .iter()
            .zip(&targets)
            .map(|(o, t)| o.iter().zip(t).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect())
            .collect();
        let g = model.backward_batch(&batch, &cache, &d_out).unwrap();
        assert!(gradient_check(loss, model.params(), &g, 1e-5) < 1e-5);
    }

    #[test]
    fn symmetric_head_has_matrix_term_count() {
        let mut rng = seeded(27);
        let mut opts = VecModelOptions::new(6, MetricSignature::euclidean(3).unwrap(), vec![2], dense(4));
        opts.symmetric_output = true;
        let full = VecToTensorModel::new(opts.clone(), &mut rng).unwrap();
        assert_eq!(full.num_terms(), 6 * 7 / 2 + 1);
        opts.diagonal_terms_only = true;
        opts.features = FeatureMode::Norms;
        let diag = VecToTensorModel::new(opts, &mut rng).unwrap();
        assert_eq!(diag.num_terms(), 7);
        assert_eq!(diag.net().input_dim(), 6);
        let out = full.forward(&random_vectors(6, 3, &mut rng)).unwrap();
        let m = out[0].to_matrix().unwrap();
        assert!((&m - m.transpose()).abs().max() < 1e-14);
    }
}
