//! Randomized equivariance audits.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::sparse::{learned_h, sos_h_hopkins, sos_h_mao, sparse_model_options, SparseModelKind};
use crate::error::Result;
use crate::groups::{group_act, sample_group};
use crate::linalg::{gaussian_matrix, haar_orthogonal};
use crate::models::general::apply_combination;
use crate::models::{
    enumerate_general_basis, CoeffNetSpec, EigenEquivariantModel, TensorSpec, VecModelOptions, VecToTensorModel,
};
use crate::nn::{Activation, DenseNet};
use crate::rng::{domain, substream};
use crate::tensor::{MetricSignature, Parity, TensorValue};

/// `‖f(g·x) − g·f(x)‖ / (1 + ‖f(x)‖)` with norms taken over all outputs jointly.
pub fn relative_defect(moved: &[TensorValue], expected: &[TensorValue], reference: &[TensorValue]) -> Result<f64> {
    let mut num = 0.0;
    for (a, b) in moved.iter().zip(expected) {
        num += a.distance(b)?.powi(2);
    }
    let den: f64 = reference.iter().map(|t| t.norm().powi(2)).sum();
    Ok(num.sqrt() / (1.0 + den.sqrt()))
}

/// Largest relative defect of `f` over `trials` fresh group elements and inputs.
pub fn equivariance_audit<F, I>(f: F, mut inputs: I, metric: &MetricSignature, trials: usize, rng: &mut ChaCha8Rng) -> Result<f64>
where
    F: Fn(&[TensorValue]) -> Result<Vec<TensorValue>>,
    I: FnMut(&mut ChaCha8Rng) -> Result<Vec<TensorValue>>,
{
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let x = inputs(rng)?;
        let g = sample_group(metric, rng)?;
        let gx = x.iter().map(|t| group_act(&g, t)).collect::<Result<Vec<_>>>()?;
        let fx = f(&x)?;
        let expected = fx.iter().map(|t| group_act(&g, t)).collect::<Result<Vec<_>>>()?;
        worst = worst.max(relative_defect(&f(&gx)?, &expected, &fx)?);
    }
    Ok(worst)
}

fn gaussian_vectors(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Result<Vec<TensorValue>> {
    (0..n).map(|_| TensorValue::vector(gaussian_matrix(rng, d, 1).as_slice())).collect()
}

/// Symmetric positive definite matrix with eigenvalues spread over `[0.5, 2.5]`.
fn gapped_spd(rng: &mut ChaCha8Rng, d: usize) -> Result<TensorValue> {
    let q = haar_orthogonal(rng, d);
    let values: Vec<f64> = (0..d).map(|i| 0.5 + 2.0 * (i as f64 + rng.random::<f64>() * 0.5) / d as f64).collect();
    let m = &q * DMatrix::from_diagonal(&DVector::from_vec(values)) * q.transpose();
    TensorValue::from_matrix(&((&m + m.transpose()) * 0.5))
}

pub fn audit_vec_model(model: &VecToTensorModel, trials: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    let (n, d) = (model.options().n, model.dim());
    equivariance_audit(|x| model.forward(x), |r| gaussian_vectors(r, n, d), &model.options().metric, trials, rng)
}

pub fn audit_eigen_model(model: &EigenEquivariantModel, trials: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    let d = model.dim();
    let metric = MetricSignature::euclidean(d)?;
    equivariance_audit(|x| Ok(vec![model.forward_sym(&x[0])?]), |r| Ok(vec![gapped_spd(r, d)?]), &metric, trials, rng)
}

fn rows_of(vectors: &[TensorValue]) -> Vec<f64> {
    vectors.iter().flat_map(|v| v.components().iter().copied()).collect()
}

/// Audits a map from `n` row vectors in `R^d` to a `d×d` matrix.
pub fn audit_rows_to_matrix<F>(h: F, n: usize, d: usize, trials: usize, rng: &mut ChaCha8Rng) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<DMatrix<f64>>,
{
    let metric = MetricSignature::euclidean(d)?;
    equivariance_audit(|x| Ok(vec![TensorValue::from_matrix(&h(&rows_of(x))?)?]), |r| gaussian_vectors(r, n, d), &metric, trials, rng)
}

pub fn audit_sparse_h(model: &VecToTensorModel, trials: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    audit_rows_to_matrix(|rows| learned_h(model, rows), model.options().n, model.dim(), trials, rng)
}

/// Audits an unconstrained dense map on `d×d` matrices. No symmetry is built
/// in, so the result is only informative.
pub fn audit_dense_matrix_map(net: &DenseNet, d: usize, trials: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    let metric = MetricSignature::euclidean(d)?;
    equivariance_audit(
        |x| Ok(vec![TensorValue::new(d, 2, Parity::Even, net.forward(x[0].components())?)?]),
        |r| Ok(vec![gapped_spd(r, d)?]),
        &metric,
        trials,
        rng,
    )
}

/// One audited `(model, group)` pair. `threshold` is `None` for models that
/// carry no symmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditRecord {
    pub model: String,
    pub group: String,
    pub defect: f64,
    pub threshold: Option<f64>,
}

impl AuditRecord {
    pub fn passed(&self) -> bool {
        self.threshold.is_none_or(|t| self.defect < t)
    }
}

/// Tolerance for exact-arithmetic constructions on orthogonal groups.
pub const ORTHOGONAL_THRESHOLD: f64 = 1e-9;
/// Tolerance for every other group and for spectral routes.
pub const GENERAL_THRESHOLD: f64 = 1e-7;

/// Every equivariant model class available for `metric`, with random
/// parameters, audited over `trials` group elements.
pub fn audit_suite(metric: &MetricSignature, trials: usize, seed: u64) -> Result<Vec<AuditRecord>> {
    let group = metric.to_string();
    let d = metric.dim();
    let mut out = Vec::new();
    let mut index = 0u64;
    let mut next_rng = || {
        index += 1;
        substream(seed, domain::AUDIT, index)
    };
    let record = |model: &str, defect: f64, threshold: Option<f64>| AuditRecord {
        model: model.to_string(),
        group: group.clone(),
        defect,
        threshold,
    };
    let tight = if metric.is_euclidean() { ORTHOGONAL_THRESHOLD } else { GENERAL_THRESHOLD };

    let nets = [
        ("vec-to-tensor/mlp", CoeffNetSpec::Dense { hidden: vec![16, 16], activation: Activation::Gelu }, GENERAL_THRESHOLD),
        ("vec-to-tensor/polynomial", CoeffNetSpec::Polynomial { degree: 2 }, tight),
    ];
    for (name, spec, threshold) in nets {
        let mut rng = next_rng();
        let model = VecToTensorModel::new(VecModelOptions::new(3, *metric, vec![1, 2, 3], spec), &mut rng)?;
        out.push(record(name, audit_vec_model(&model, trials, &mut rng)?, Some(threshold)));
    }

    if metric.is_euclidean() {
        let mut rng = next_rng();
        let model = EigenEquivariantModel::new(d, &[16, 16], Activation::Gelu, &mut rng)?;
        out.push(record("eigen", audit_eigen_model(&model, trials, &mut rng)?, Some(1e-8)));

        let mut rng = next_rng();
        let vec_spec = TensorSpec::new(1, Parity::Even);
        let mat_spec = TensorSpec::new(2, Parity::Even);
        let maps = enumerate_general_basis(&[vec_spec, mat_spec], mat_spec, 2, metric, true)?;
        let beta: Vec<f64> = (0..maps.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let defect = equivariance_audit(
            |x| Ok(vec![apply_combination(&maps, &beta, x)?]),
            |r| Ok(vec![gaussian_vectors(r, 1, d)?.remove(0), TensorValue::from_matrix(&gaussian_matrix(r, d, d))?]),
            metric,
            trials,
            &mut rng,
        )?;
        out.push(record("general-basis", defect, Some(ORTHOGONAL_THRESHOLD)));

        for (name, kind) in [("learned-h/full", SparseModelKind::Full), ("learned-h/diag", SparseModelKind::Diag)] {
            let mut rng = next_rng();
            let model = VecToTensorModel::new(sparse_model_options(kind, 8, d, vec![16])?, &mut rng)?;
            out.push(record(name, audit_sparse_h(&model, trials, &mut rng)?, Some(GENERAL_THRESHOLD)));
        }

        let mut rng = next_rng();
        out.push(record("sos-hopkins", audit_rows_to_matrix(|r| sos_h_hopkins(r, d), 8, d, trials, &mut rng)?, Some(ORTHOGONAL_THRESHOLD)));
        out.push(record("sos-mao", audit_rows_to_matrix(|r| sos_h_mao(r, d), 8, d, trials, &mut rng)?, Some(ORTHOGONAL_THRESHOLD)));

        let mut rng = next_rng();
        let net = DenseNet::new(&[d * d, 16, 16, d * d], Activation::Gelu, &mut rng)?;
        out.push(record("mlp-baseline", audit_dense_matrix_map(&net, d, trials, &mut rng)?, None));
    }
    Ok(out)
}

/// Tab-separated report of an audit run.
pub fn format_audit(records: &[AuditRecord]) -> String {
    let mut s = String::from("model\tgroup\tmax_defect\tthreshold\tstatus\n");
    for r in records {
        let (threshold, status) = match r.threshold {
            Some(t) => (format!("{t:.0e}"), if r.passed() { "ok" } else { "FAIL" }),
            None => ("-".to_string(), "reported"),
        };
        s.push_str(&format!("{}\t{}\t{:.3e}\t{}\t{}\n", r.model, r.group, r.defect, threshold, status));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_for_each_group() {
        for m in ["o3", "o2", "lorentz", "sp4"] {
            let metric: MetricSignature = m.parse().unwrap();
            let records = audit_suite(&metric, 4, 1).unwrap();
            assert!(records.len() >= 2);
            for r in &records {
                assert!(r.passed(), "{r:?}");
            }
        }
    }

    #[test]
    fn suite_is_seeded() {
        let m = MetricSignature::euclidean(3).unwrap();
        assert_eq!(audit_suite(&m, 2, 5).unwrap(), audit_suite(&m, 2, 5).unwrap());
    }

    #[test]
    fn detects_a_non_equivariant_map() {
        let mut rng = substream(0, domain::AUDIT, 0);
        let m = MetricSignature::euclidean(3).unwrap();
        let shift = |x: &[TensorValue]| Ok(vec![x[0].add(&TensorValue::basis_vector(3, 0)?)?]);
        let defect = equivariance_audit(shift, |r| gaussian_vectors(r, 1, 3), &m, 8, &mut rng).unwrap();
        assert!(defect > 1e-2);
        let net = DenseNet::new(&[9, 8, 9], Activation::Gelu, &mut rng).unwrap();
        assert!(audit_dense_matrix_map(&net, 3, 8, &mut rng).unwrap() > 1e-3);
        let report = format_audit(&[AuditRecord { model: "x".into(), group: "euclidean:3".into(), defect: 0.5, threshold: None }]);
        assert!(report.contains("reported"));
    }
}
