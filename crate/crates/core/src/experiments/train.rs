//! Training and evaluation pipelines.

use std::cell::RefCell;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use super::config::{ExperimentConfig, ExperimentKind, ModelChoice};
use super::dataset::{Dataset, DatasetHeader, Split};
use super::metrics::MetricsLog;
use super::signature::discrete_signature_baseline;
use super::sparse::{
    estimate_sparse, recovery_loss_grad, recovery_score, sos_h_hopkins, sos_h_mao, sparse_model_options, SparseModelKind,
};
use crate::error::{Error, Result};
use crate::groups::{group_act, sample_group};
use crate::models::checkpoint::{Checkpoint, SavedModel};
use crate::models::{CoeffNetSpec, EigenEquivariantModel, SpectrumScaling, VecModelOptions, VecToTensorModel};
use crate::nn::{dense_param_count, gradient_check, Activation, DenseNet, Optimizer, OptimizerKind, Schedule};
use crate::rng::{domain, substream};
use crate::tensor::{Parity, TensorValue};

/// Records evaluated per forward batch.
const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub metrics: MetricsLog,
    pub metric_name: &'static str,
    pub test_metric: f64,
}

/// Name of the reported metric and whether larger values are better.
pub fn experiment_metric(kind: ExperimentKind) -> (&'static str, bool) {
    match kind {
        ExperimentKind::Signature => ("loss", false),
        ExperimentKind::StressStrain => ("mse", false),
        ExperimentKind::Sparse => ("score", true),
    }
}

trait Task {
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    /// Mean training loss and its parameter gradient over a batch.
    fn loss_grad(&self, batch: &[&[f64]]) -> Result<(f64, Vec<f64>)>;
    /// Mean experiment metric over records.
    fn evaluate(&self, records: &[Vec<f64>]) -> Result<f64>;
    fn into_checkpoint(self: Box<Self>) -> Checkpoint;
}

fn chunked_mean(records: &[Vec<f64>], mut per_chunk: impl FnMut(&[&[f64]]) -> Result<f64>) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate an empty split".into()));
    }
    let mut total = 0.0;
    for chunk in records.chunks(EVAL_CHUNK) {
        let refs: Vec<&[f64]> = chunk.iter().map(|r| r.as_slice()).collect();
        total += per_chunk(&refs)?;
    }
    Ok(total / records.len() as f64)
}

fn add_into(acc: &mut [f64], g: &[f64]) {
    for (a, b) in acc.iter_mut().zip(g) {
        *a += b;
    }
}

// ---- path signatures

struct SignatureEquivariant {
    model: VecToTensorModel,
    /// `1 / (M d^k)` per level.
    weights: Vec<f64>,
}

impl SignatureEquivariant {
    fn new(model: VecToTensorModel) -> Self {
        let d = model.dim() as f64;
        let m = model.heads().len() as f64;
        let weights = model.heads().iter().map(|h| 1.0 / (m * d.powi(h.order as i32))).collect();
        Self { model, weights }
    }

    fn split_record<'a>(&self, rec: &'a [f64]) -> (&'a [f64], Vec<&'a [f64]>) {
        let nd = self.model.options().n * self.model.dim();
        let mut targets = Vec::new();
        let mut at = nd;
        for h in self.model.heads() {
            let len = self.model.dim().pow(h.order as u32);
            targets.push(&rec[at..at + len]);
            at += len;
        }
        (&rec[..nd], targets)
    }

    /// Summed loss over the batch and, when asked, output gradients of the mean.
    fn batch_loss(&self, batch: &[&[f64]], want_grad: bool) -> Result<(f64, Vec<f64>)> {
        let inputs: Vec<&[f64]> = batch.iter().map(|r| self.split_record(r).0).collect();
        let (out, cache) = self.model.forward_batch(&inputs)?;
        let scale = 2.0 / batch.len() as f64;
        let mut total = 0.0;
        let mut d_out = Vec::with_capacity(batch.len());
        for (rec, pred) in batch.iter().zip(&out) {
            let (_, targets) = self.split_record(rec);
            let mut grads = Vec::with_capacity(pred.len());
            for ((p, t), w) in pred.iter().zip(&targets).zip(&self.weights) {
                let diff: Vec<f64> = p.iter().zip(t.iter()).map(|(a, b)| a - b).collect();
                total += w * diff.iter().map(|x| x * x).sum::<f64>();
                grads.push(diff.into_iter().map(|x| x * w * scale).collect());
            }
            d_out.push(grads);
        }
        if !want_grad {
            return Ok((total, Vec::new()));
        }
        Ok((total, self.model.backward_batch(&inputs, &cache, &d_out)?))
    }
}

impl Task for SignatureEquivariant {
    fn params(&self) -> &[f64] {
        self.model.params()
    }

    fn params_mut(&mut self) -> &mut [f64] {
        self.model.params_mut()
    }

    fn loss_grad(&self, batch: &[&[f64]]) -> Result<(f64, Vec<f64>)> {
        let (total, g) = self.batch_loss(batch, true)?;
        Ok((total / batch.len() as f64, g))
    }

    fn evaluate(&self, records: &[Vec<f64>]) -> Result<f64> {
        chunked_mean(records, |b| Ok(self.batch_loss(b, false)?.0))
    }

    fn into_checkpoint(self: Box<Self>) -> Checkpoint {
        Checkpoint { model: SavedModel::VecToTensor(self.model), normalization: Vec::new() }
    }
}

/// Dense regressor from a fixed-size input to a fixed-size output, both
/// mapped through per-component affine normalizations, trained on squared
/// error in normalized units scaled by `loss_scale`.
struct DenseRegression {
    net: DenseNet,
    input_len: usize,
    in_shift: Vec<f64>,
    in_scale: Vec<f64>,
    out_shift: Vec<f64>,
    out_scale: Vec<f64>,
    loss_scale: f64,
    /// Metric weights per output component, in raw units.
    metric_weights: Vec<f64>,
}

impl DenseRegression {
    fn inputs(&self, batch: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(batch.len(), self.input_len, |r, c| (batch[r][c] - self.in_shift[c]) / self.in_scale[c])
    }

    fn targets(&self, rec: &[f64]) -> Vec<f64> {
        rec[self.input_len..].iter().enumerate().map(|(c, y)| (y - self.out_shift[c]) / self.out_scale[c]).collect()
    }
}

impl Task for DenseRegression {
    fn params(&self) -> &[f64] {
        self.net.params()
    }

    fn params_mut(&mut self) -> &mut [f64] {
        self.net.params_mut()
    }

    fn loss_grad(&self, batch: &[&[f64]]) -> Result<(f64, Vec<f64>)> {
        let (y, cache) = self.net.forward_batch(&self.inputs(batch))?;
        let b = batch.len() as f64;
        let mut dy = DMatrix::zeros(y.nrows(), y.ncols());
        let mut total = 0.0;
        for (r, rec) in batch.iter().enumerate() {
            for (c, t) in self.targets(rec).into_iter().enumerate() {
                let diff = y[(r, c)] - t;
                total += self.loss_scale * diff * diff;
                dy[(r, c)] = 2.0 * self.loss_scale * diff / b;
            }
        }
        Ok((total / b, self.net.backward_batch(&cache, &dy)?.0))
    }

    fn evaluate(&self, records: &[Vec<f64>]) -> Result<f64> {
        chunked_mean(records, |batch| {
            let (y, _) = self.net.forward_batch(&self.inputs(batch))?;
            let mut total = 0.0;
            for (r, rec) in batch.iter().enumerate() {
                for c in 0..y.ncols() {
                    let pred = y[(r, c)] * self.out_scale[c] + self.out_shift[c];
                    total += self.metric_weights[c] * (pred - rec[self.input_len + c]).powi(2);
                }
            }
            Ok(total)
        })
    }

    fn into_checkpoint(self: Box<Self>) -> Checkpoint {
        let normalization = [self.in_shift, self.in_scale, self.out_shift, self.out_scale].concat();
        Checkpoint { model: SavedModel::Mlp(self.net), normalization }
    }
}

fn signature_output_scales(header: &DatasetHeader) -> (Vec<f64>, Vec<f64>) {
    let d = header.d;
    let m = header.orders.len() as f64;
    let mut scale = Vec::new();
    let mut weights = Vec::new();
    for &k in &header.orders {
        let len = d.pow(k as u32);
        scale.extend(std::iter::repeat_n((d as f64).powf(k as f64 / 2.0), len));
        weights.extend(std::iter::repeat_n(1.0 / (m * (d as f64).powi(k as i32)), len));
    }
    (scale, weights)
}

fn signature_mlp(net: DenseNet, header: &DatasetHeader) -> Result<DenseRegression> {
    let input_len = header.n * header.d;
    let (out_scale, metric_weights) = signature_output_scales(header);
    if net.input_dim() != input_len || net.output_dim() != out_scale.len() {
        return Err(Error::DimensionMismatch { expected: input_len, got: net.input_dim() });
    }
    Ok(DenseRegression {
        net,
        input_len,
        in_shift: vec![0.0; input_len],
        in_scale: vec![1.0; input_len],
        out_shift: vec![0.0; out_scale.len()],
        out_scale,
        loss_scale: 1.0 / header.orders.len() as f64,
        metric_weights,
    })
}

// ---- stress-strain

fn mat(d: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(d, d, data)
}

struct StressEigen {
    model: EigenEquivariantModel,
}

impl StressEigen {
    fn loss_sum(&self, batch: &[&[f64]], want_grad: bool) -> Result<(f64, f64, Vec<f64>)> {
        let d = self.model.dim();
        let s2 = self.model.scaling.output_std.powi(2);
        let mut grads = vec![0.0; if want_grad { self.model.num_params() } else { 0 }];
        let (mut raw, mut scaled) = (0.0, 0.0);
        for rec in batch {
            let (y, cache) = self.model.forward_train(&mat(d, &rec[..d * d]))?;
            let diff = y - mat(d, &rec[d * d..]);
            let sq = diff.norm_squared();
            raw += sq;
            scaled += sq / s2;
            if want_grad {
                let g = diff * (2.0 / (batch.len() as f64 * s2));
                add_into(&mut grads, &self.model.backward_train(&cache, &g)?);
            }
        }
        Ok((raw, scaled, grads))
    }
}

impl Task for StressEigen {
    fn params(&self) -> &[f64] {
        self.model.params()
    }

    fn params_mut(&mut self) -> &mut [f64] {
        self.model.params_mut()
    }

    fn loss_grad(&self, batch: &[&[f64]]) -> Result<(f64, Vec<f64>)> {
        let (_, scaled, g) = self.loss_sum(batch, true)?;
        Ok((scaled / batch.len() as f64, g))
    }

    fn evaluate(&self, records: &[Vec<f64>]) -> Result<f64> {
        chunked_mean(records, |b| Ok(self.loss_sum(b, false)?.0))
    }

    fn into_checkpoint(self: Box<Self>) -> Checkpoint {
        Checkpoint { model: SavedModel::Eigen(self.model), normalization: Vec::new() }
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count().max(1) as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, if var > 0.0 { var.sqrt() } else { 1.0 })
}

/// Mean and standard deviation of every eigenvalue of the input and output matrices.
fn spectrum_scaling(records: &[Vec<f64>], d: usize) -> Result<SpectrumScaling> {
    let mut ins = Vec::new();
    let mut outs = Vec::new();
    for rec in records {
        ins.extend(mat(d, &rec[..d * d]).symmetric_eigenvalues().iter().cloned());
        outs.extend(mat(d, &rec[d * d..]).symmetric_eigenvalues().iter().cloned());
    }
    let (input_mean, input_std) = mean_std(ins.iter().cloned());
    let (output_mean, output_std) = mean_std(outs.iter().cloned());
    Ok(SpectrumScaling { input_mean, input_std, output_mean, output_std })
}

fn component_stats(records: &[Vec<f64>], range: std::ops::Range<usize>) -> (Vec<f64>, Vec<f64>) {
    range.map(|c| mean_std(records.iter().map(move |r| r[c]))).unzip()
}

fn stress_mlp(net: DenseNet, d: usize, normalization: &[f64]) -> Result<DenseRegression> {
    let m = d * d;
    if normalization.len() != 4 * m || net.input_dim() != m || net.output_dim() != m {
        return Err(Error::Format("stress checkpoint does not match the data dimension".into()));
    }
    let part = |i: usize| normalization[i * m..(i + 1) * m].to_vec();
    let out_scale = part(3);
    let loss_scale = 1.0;
    Ok(DenseRegression {
        net,
        input_len: m,
        in_shift: part(0),
        in_scale: part(1),
        out_shift: part(2),
        out_scale,
        loss_scale,
        metric_weights: vec![1.0; m],
    })
}

// ---- sparse vector

fn split_sparse(rec: &[f64], n: usize, d: usize) -> (&[f64], DMatrix<f64>, nalgebra::DVector<f64>) {
    let rows = &rec[..n * d];
    (rows, DMatrix::from_row_slice(n, d, rows), nalgebra::DVector::from_column_slice(&rec[n * d..]))
}

struct SparseLearned {
    model: VecToTensorModel,
}

impl Task for SparseLearned {
    fn params(&self) -> &[f64] {
        self.model.params()
    }

    fn params_mut(&mut self) -> &mut [f64] {
        self.model.params_mut()
    }

    fn loss_grad(&self, batch: &[&[f64]]) -> Result<(f64, Vec<f64>)> {
        let (n, d) = (self.model.options().n, self.model.dim());
        let rows: Vec<&[f64]> = batch.iter().map(|r| &r[..n * d]).collect();
        let (out, cache) = self.model.forward_batch(&rows)?;
        let b = batch.len() as f64;
        let mut total = 0.0;
        let mut d_out = Vec::with_capacity(batch.len());
        for (rec, o) in batch.iter().zip(&out) {
            let (_, basis, target) = split_sparse(rec, n, d);
            let (loss, g) = recovery_loss_grad(&basis, &target, &mat(d, &o[0]))?;
            total += loss;
            let flat: Vec<f64> = (0..d * d).map(|i| g[(i / d, i % d)] / b).collect();
            d_out.push(vec![flat]);
        }
        Ok((total / b, self.model.backward_batch(&rows, &cache, &d_out)?))
    }

    fn evaluate(&self, records: &[Vec<f64>]) -> Result<f64> {
        let (n, d) = (self.model.options().n, self.model.dim());
        chunked_mean(records, |batch| {
            let rows: Vec<&[f64]> = batch.iter().map(|r| &r[..n * d]).collect();
            let (out, _) = self.model.forward_batch(&rows)?;
            let mut total = 0.0;
            for (rec, o) in batch.iter().zip(&out) {
                let (_, basis, target) = split_sparse(rec, n, d);
                total += recovery_score(&target, &estimate_sparse(&basis, &mat(d, &o[0]))?);
            }
            Ok(total)
        })
    }

    fn into_checkpoint(self: Box<Self>) -> Checkpoint {
        Checkpoint { model: SavedModel::VecToTensor(self.model), normalization: Vec::new() }
    }
}

/// Non-equivariant estimator: rows in, upper triangle of `h` out.
struct SparseMlp {
    net: DenseNet,
    n: usize,
    d: usize,
}

impl SparseMlp {
    fn input_scale(&self) -> f64 {
        (self.n as f64 / self.d as f64).sqrt()
    }

    fn forward(&self, batch: &[&[f64]]) -> Result<(Vec<DMatrix<f64>>, crate::nn::DenseCache, DMatrix<f64>)> {
        let (n, d) = (self.n, self.d);
        let s = self.input_scale();
        let x = DMatrix::from_fn(batch.len(), n * d, |r, c| batch[r][c] * s);
        let (y, cache) = self.net.forward_batch(&x)?;
        let hs = (0..batch.len())
            .map(|r| {
                let mut h = DMatrix::zeros(d, d);
                let mut t = 0;
                for i in 0..d {
                    for j in i..d {
                        h[(i, j)] = y[(r, t)];
                        h[(j, i)] = y[(r, t)];
                        t += 1;
                    }
                }
                h
            })
            .collect();
        Ok((hs, cache, y))
    }
}

impl Task for SparseMlp {
    fn params(&self) -> &[f64] {
        self.net.params()
    }

    fn params_mut(&mut self) -> &mut [f64] {
        self.net.params_mut()
    }

    fn loss_grad(&self, batch: &[&[f64]]) -> Result<(f64, Vec<f64>)> {
        let (n, d) = (self.n, self.d);
        let (hs, cache, y) = self.forward(batch)?;
        let b = batch.len() as f64;
        let mut dy = DMatrix::zeros(y.nrows(), y.ncols());
        let mut total = 0.0;
        for (r, (rec, h)) in batch.iter().zip(&hs).enumerate() {
            let (_, basis, target) = split_sparse(rec, n, d);
            let (loss, g) = recovery_loss_grad(&basis, &target, h)?;
            total += loss;
            let mut t = 0;
            for i in 0..d {
                for j in i..d {
                    let v = if i == j { g[(i, i)] } else { g[(i, j)] + g[(j, i)] };
                    dy[(r, t)] = v / b;
                    t += 1;
                }
            }
        }
        Ok((total / b, self.net.backward_batch(&cache, &dy)?.0))
    }

    fn evaluate(&self, records: &[Vec<f64>]) -> Result<f64> {
        let (n, d) = (self.n, self.d);
        chunked_mean(records, |batch| {
            let (hs, _, _) = self.forward(batch)?;
            let mut total = 0.0;
            for (rec, h) in batch.iter().zip(&hs) {
                let (_, basis, target) = split_sparse(rec, n, d);
                total += recovery_score(&target, &estimate_sparse(&basis, h)?);
            }
            Ok(total)
        })
    }

    fn into_checkpoint(self: Box<Self>) -> Checkpoint {
        Checkpoint { model: SavedModel::Mlp(self.net), normalization: Vec::new() }
    }
}

// ---- shared loop

struct FitSettings {
    epochs: usize,
    batch: usize,
    seed: u64,
    optimizer: Optimizer,
    patience: usize,
    higher_is_better: bool,
    metric: &'static str,
}

fn fit(task: &mut dyn Task, train: &[Vec<f64>], val: &[Vec<f64>], mut s: FitSettings) -> Result<MetricsLog> {
    let mut log = MetricsLog::default();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut since_best = 0;
    for epoch in 0..s.epochs {
        order.sort_unstable();
        order.shuffle(&mut substream(s.seed, domain::SHUFFLE, epoch as u64));
        let mut epoch_loss = 0.0;
        for (step, idx) in order.chunks(s.batch).enumerate() {
            let batch: Vec<&[f64]> = idx.iter().map(|&i| train[i].as_slice()).collect();
            let (loss, grads) = task.loss_grad(&batch)?;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged(format!("non-finite loss or gradient at epoch {epoch}, step {step} (loss {loss})")));
            }
            s.optimizer.step(task.params_mut(), &grads)?;
            epoch_loss += loss * idx.len() as f64;
        }
        log.push(epoch, "train", "loss", epoch_loss / train.len() as f64);
        if !val.is_empty() {
            let v = task.evaluate(val)?;
            if !v.is_finite() {
                return Err(Error::Diverged(format!("non-finite validation {} at epoch {epoch}", s.metric)));
            }
            log.push(epoch, "val", s.metric, v);
            if s.patience > 0 {
                let objective = if s.higher_is_better { -v } else { v };
                if best.as_ref().is_none_or(|(b, _)| objective < *b) {
                    best = Some((objective, task.params().to_vec()));
                    since_best = 0;
                } else {
                    since_best += 1;
                    if since_best >= s.patience {
                        break;
                    }
                }
            }
        }
    }
    if let Some((_, params)) = best {
        task.params_mut().copy_from_slice(&params);
    }
    Ok(log)
}

// ---- construction

fn act_on_record(header: &DatasetHeader, rec: &[f64], g: &crate::groups::GroupElement) -> Result<Vec<f64>> {
    let d = header.d;
    let mut out = Vec::with_capacity(rec.len());
    match header.experiment {
        ExperimentKind::Signature => {
            for p in rec[..header.n * d].chunks(d) {
                out.extend(g.apply_vec(p));
            }
            let mut at = header.n * d;
            for &k in &header.orders {
                let len = d.pow(k as u32);
                let t = TensorValue::new(d, k, Parity::Even, rec[at..at + len].to_vec())?;
                out.extend_from_slice(group_act(g, &t)?.components());
                at += len;
            }
        }
        ExperimentKind::StressStrain => {
            for part in rec.chunks(d * d) {
                out.extend_from_slice(group_act(g, &TensorValue::new(d, 2, Parity::Even, part.to_vec())?)?.components());
            }
        }
        ExperimentKind::Sparse => return Err(Error::Unsupported("augmentation of sparse data".into())),
    }
    Ok(out)
}

/// Replaces every record by `copies` randomly transformed copies.
fn augment(header: &DatasetHeader, records: &[Vec<f64>], copies: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(records.len() * copies);
    for (i, rec) in records.iter().enumerate() {
        let mut rng = substream(seed, domain::AUGMENT, i as u64);
        for _ in 0..copies {
            let g = sample_group(&header.metric, &mut rng)?;
            out.push(act_on_record(header, rec, &g)?);
        }
    }
    Ok(out)
}

fn widths_with(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut w = vec![input];
    w.extend_from_slice(hidden);
    w.push(output);
    w
}

/// Hidden width, with the configured number of hidden layers, whose dense
/// parameter count is closest to `target`.
pub fn matched_width(input: usize, layers: usize, output: usize, target: usize) -> usize {
    (1..=4096)
        .min_by_key(|&w| dense_param_count(&widths_with(input, &vec![w; layers], output)).abs_diff(target))
        .unwrap_or(1)
}

fn signature_options(cfg: &ExperimentConfig, header: &DatasetHeader) -> VecModelOptions {
    let net = CoeffNetSpec::Dense { hidden: cfg.widths.clone(), activation: Activation::Gelu };
    VecModelOptions::new(header.n, header.metric, header.orders.clone(), net)
}

fn check_header(cfg: &ExperimentConfig, header: &DatasetHeader) -> Result<()> {
    if header.experiment != cfg.experiment {
        return Err(Error::Config(format!("dataset holds {} data but the config is for {}", header.experiment, cfg.experiment)));
    }
    if cfg.experiment == ExperimentKind::Sparse && (header.n != cfg.n || header.d != cfg.d) {
        return Err(Error::Config("dataset shape does not match the config".into()));
    }
    Ok(())
}

fn build_task(cfg: &ExperimentConfig, data: &Dataset, train: &[Vec<f64>]) -> Result<Box<dyn Task>> {
    let h = &data.header;
    let rng = &mut substream(cfg.seed, domain::INIT, 0);
    let task: Box<dyn Task> = match (cfg.experiment, cfg.model) {
        (ExperimentKind::Signature, ModelChoice::Equivariant) => {
            Box::new(SignatureEquivariant::new(VecToTensorModel::new(signature_options(cfg, h), rng)?))
        }
        (ExperimentKind::Signature, ModelChoice::Mlp | ModelChoice::MlpParams) => {
            let out: usize = h.orders.iter().map(|k| h.d.pow(*k as u32)).sum();
            let hidden = if cfg.model == ModelChoice::MlpParams {
                let target = VecToTensorModel::new(signature_options(cfg, h), &mut substream(cfg.seed, domain::INIT, 1))?.num_params();
                vec![matched_width(h.n * h.d, cfg.widths.len(), out, target); cfg.widths.len()]
            } else {
                cfg.widths.clone()
            };
            let net = DenseNet::new(&widths_with(h.n * h.d, &hidden, out), Activation::Gelu, rng)?;
            Box::new(signature_mlp(net, h)?)
        }
        (ExperimentKind::StressStrain, ModelChoice::Equivariant) => {
            let mut model = EigenEquivariantModel::new(h.d, &cfg.widths, Activation::Gelu, rng)?;
            model.scaling = spectrum_scaling(train, h.d)?;
            Box::new(StressEigen { model })
        }
        (ExperimentKind::StressStrain, ModelChoice::Mlp | ModelChoice::MlpParams) => {
            let m = h.d * h.d;
            let hidden = if cfg.model == ModelChoice::MlpParams {
                let target = crate::nn::perm_param_count(&widths_with(1, &cfg.widths, 1));
                vec![matched_width(m, cfg.widths.len(), m, target); cfg.widths.len()]
            } else {
                cfg.widths.clone()
            };
            let (in_mean, in_std) = component_stats(train, 0..m);
            let (out_mean, out_std) = component_stats(train, m..2 * m);
            let net = DenseNet::new(&widths_with(m, &hidden, m), Activation::Gelu, rng)?;
            Box::new(stress_mlp(net, h.d, &[in_mean, in_std, out_mean, out_std].concat())?)
        }
        (ExperimentKind::Sparse, ModelChoice::Equivariant | ModelChoice::Diag) => {
            let kind = if cfg.model == ModelChoice::Diag { SparseModelKind::Diag } else { SparseModelKind::Full };
            let opts = sparse_model_options(kind, h.n, h.d, cfg.widths.clone())?;
            Box::new(SparseLearned { model: VecToTensorModel::new(opts, rng)? })
        }
        (ExperimentKind::Sparse, ModelChoice::Mlp) => {
            let out = h.d * (h.d + 1) / 2;
            let net = DenseNet::new(&widths_with(h.n * h.d, &cfg.widths, out), Activation::Relu, rng)?;
            Box::new(SparseMlp { net, n: h.n, d: h.d })
        }
        (e, m) => return Err(Error::Config(format!("model {m} cannot be trained on the {e} experiment"))),
    };
    Ok(task)
}

/// Worst relative error between the training gradient of the configured
/// architecture, freshly initialized, and central differences with step
/// `1e-5`, over the first `batch` training records.
pub fn check_gradients(cfg: &ExperimentConfig, data: &Dataset, batch: usize) -> Result<f64> {
    check_header(cfg, &data.header)?;
    let train = data.split(Split::Train).to_vec();
    let task = RefCell::new(build_task(cfg, data, &train)?);
    let records: Vec<&[f64]> = train.iter().take(batch).map(|r| r.as_slice()).collect();
    let (_, grads) = task.borrow().loss_grad(&records)?;
    let p0 = task.borrow().params().to_vec();
    let failure = RefCell::new(None);
    let loss = |p: &[f64]| {
        task.borrow_mut().params_mut().copy_from_slice(p);
        let r = task.borrow().loss_grad(&records);
        r.unwrap_or_else(|e| {
            failure.borrow_mut().get_or_insert(e);
            (f64::NAN, Vec::new())
        })
        .0
    };
    let err = gradient_check(loss, &p0, &grads, 1e-5);
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(err),
    }
}

/// Trains the configured model on `data` and evaluates it on the test split.
pub fn train_experiment(cfg: &ExperimentConfig, data: &Dataset) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_header(cfg, &data.header)?;
    if !cfg.model.is_trainable() {
        return Err(Error::Config(format!("model {} has no parameters to train; evaluate it instead", cfg.model)));
    }
    let mut train = data.split(Split::Train).to_vec();
    if cfg.augment > 0 {
        train = augment(&data.header, &train, cfg.augment, cfg.seed)?;
    }
    let mut task = build_task(cfg, data, &train)?;
    let (metric, higher_is_better) = experiment_metric(cfg.experiment);
    let steps = (cfg.epochs * train.len().div_ceil(cfg.batch)) as u64;
    let optimizer = match cfg.experiment {
        ExperimentKind::Sparse => {
            Optimizer::new(OptimizerKind::Adam, Schedule::Exponential { initial: cfg.lr, rate: 0.999 }, task.params().len())
        }
        _ => Optimizer::adamw(Schedule::Cosine { peak: cfg.lr, total_steps: steps }, task.params().len()),
    };
    let settings = FitSettings {
        epochs: cfg.epochs,
        batch: cfg.batch,
        seed: cfg.seed,
        optimizer,
        patience: cfg.patience,
        higher_is_better,
        metric,
    };
    let mut metrics = fit(task.as_mut(), &train, data.split(Split::Val), settings)?;
    let test_metric = task.evaluate(data.split(Split::Test))?;
    metrics.push(cfg.epochs, "test", metric, test_metric);
    Ok(TrainOutcome { checkpoint: task.into_checkpoint(), metrics, metric_name: metric, test_metric })
}

fn task_from_checkpoint(ckpt: &Checkpoint, header: &DatasetHeader) -> Result<Box<dyn Task>> {
    let mismatch = || Error::Format(format!("checkpoint does not fit the {} dataset", header.experiment));
    let task: Box<dyn Task> = match (header.experiment, &ckpt.model) {
        (ExperimentKind::Signature, SavedModel::VecToTensor(m)) => {
            if m.options().n != header.n || m.dim() != header.d {
                return Err(mismatch());
            }
            Box::new(SignatureEquivariant::new(m.clone()))
        }
        (ExperimentKind::Signature, SavedModel::Mlp(net)) => Box::new(signature_mlp(net.clone(), header)?),
        (ExperimentKind::StressStrain, SavedModel::Eigen(m)) => {
            if m.dim() != header.d {
                return Err(mismatch());
            }
            Box::new(StressEigen { model: m.clone() })
        }
        (ExperimentKind::StressStrain, SavedModel::Mlp(net)) => Box::new(stress_mlp(net.clone(), header.d, &ckpt.normalization)?),
        (ExperimentKind::Sparse, SavedModel::VecToTensor(m)) => {
            if m.options().n != header.n || m.dim() != header.d {
                return Err(mismatch());
            }
            Box::new(SparseLearned { model: m.clone() })
        }
        (ExperimentKind::Sparse, SavedModel::Mlp(net)) => {
            if net.input_dim() != header.n * header.d {
                return Err(mismatch());
            }
            Box::new(SparseMlp { net: net.clone(), n: header.n, d: header.d })
        }
        _ => return Err(mismatch()),
    };
    Ok(task)
}

/// Experiment metric of a checkpoint on one split.
pub fn eval_experiment(ckpt: &Checkpoint, data: &Dataset, split: Split) -> Result<f64> {
    task_from_checkpoint(ckpt, &data.header)?.evaluate(data.split(split))
}

/// Experiment metric of a fixed estimator on one split.
pub fn eval_baseline(model: ModelChoice, data: &Dataset, split: Split) -> Result<f64> {
    let h = &data.header;
    let records = data.split(split);
    if records.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate an empty split".into()));
    }
    let mut total = 0.0;
    match (h.experiment, model) {
        (ExperimentKind::Signature, ModelChoice::Discrete) => {
            let levels = h.orders.len();
            for rec in records {
                let points = rec[..h.n * h.d].chunks(h.d).map(TensorValue::vector).collect::<Result<Vec<_>>>()?;
                let pred = discrete_signature_baseline(&points, levels)?;
                let mut at = h.n * h.d;
                let mut truth = Vec::with_capacity(levels);
                for &k in &h.orders {
                    let len = h.d.pow(k as u32);
                    truth.push(TensorValue::new(h.d, k, Parity::Even, rec[at..at + len].to_vec())?);
                    at += len;
                }
                total += super::signature::signature_loss(&truth, &pred)?;
            }
        }
        (ExperimentKind::Sparse, ModelChoice::SosHopkins | ModelChoice::SosMao) => {
            for rec in records {
                let (rows, basis, target) = split_sparse(rec, h.n, h.d);
                let hm = if model == ModelChoice::SosMao { sos_h_mao(rows, h.d)? } else { sos_h_hopkins(rows, h.d)? };
                total += recovery_score(&target, &estimate_sparse(&basis, &hm)?);
            }
        }
        (e, m) => return Err(Error::Config(format!("model {m} is not a fixed estimator for the {e} experiment"))),
    }
    Ok(total / records.len() as f64)
}
