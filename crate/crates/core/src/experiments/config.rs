//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are
//! rejected. Keys not given take per-experiment defaults.

use std::fmt;
use std::str::FromStr;

use super::sparse::{CovarianceKind, SamplingScheme};
use crate::error::{Error, Result};
use crate::tensor::MetricSignature;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    Signature,
    StressStrain,
    Sparse,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::Signature => "signature",
            ExperimentKind::StressStrain => "stress",
            ExperimentKind::Sparse => "sparse",
        })
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "signature" | "path-signature" => Ok(ExperimentKind::Signature),
            "stress" | "stress-strain" | "neohookean" => Ok(ExperimentKind::StressStrain),
            "sparse" | "sparse-vector" => Ok(ExperimentKind::Sparse),
            _ => Err(Error::Config(format!("unknown experiment '{s}' (expected signature, stress or sparse)"))),
        }
    }
}

/// Which estimator a run trains or evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelChoice {
    /// The equivariant model of the experiment.
    Equivariant,
    /// Norm-only variant of the learned sparse estimator.
    Diag,
    /// Plain MLP with the configured widths.
    Mlp,
    /// Plain MLP widened to match the equivariant model's parameter count.
    MlpParams,
    Discrete,
    SosHopkins,
    SosMao,
}

impl ModelChoice {
    pub fn is_trainable(self) -> bool {
        matches!(self, ModelChoice::Equivariant | ModelChoice::Diag | ModelChoice::Mlp | ModelChoice::MlpParams)
    }
}

impl fmt::Display for ModelChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelChoice::Equivariant => "equivariant",
            ModelChoice::Diag => "diag",
            ModelChoice::Mlp => "mlp",
            ModelChoice::MlpParams => "mlp-params",
            ModelChoice::Discrete => "discrete",
            ModelChoice::SosHopkins => "sos-hopkins",
            ModelChoice::SosMao => "sos-mao",
        })
    }
}

impl FromStr for ModelChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equivariant" => Ok(ModelChoice::Equivariant),
            "diag" => Ok(ModelChoice::Diag),
            "mlp" => Ok(ModelChoice::Mlp),
            "mlp-params" => Ok(ModelChoice::MlpParams),
            "discrete" => Ok(ModelChoice::Discrete),
            "sos-hopkins" => Ok(ModelChoice::SosHopkins),
            "sos-mao" | "sos" => Ok(ModelChoice::SosMao),
            _ => Err(Error::Config(format!(
                "unknown model '{s}' (expected equivariant, diag, mlp, mlp-params, discrete, sos-hopkins or sos-mao)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    /// Group whose invariants the equivariant model uses.
    pub group: MetricSignature,
    /// Vector dimension (overridden by `group` for signatures).
    pub d: usize,
    /// Points per path, or rows per sparse instance.
    pub n: usize,
    pub degree: usize,
    /// Signature truncation level.
    pub levels: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub lambda: f64,
    pub mu: f64,
    pub eta: f64,
    pub scheme: SamplingScheme,
    pub covariance: CovarianceKind,
    pub epsilon: f64,
    pub model: ModelChoice,
    /// Hidden layer widths.
    pub widths: Vec<usize>,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    /// Random group transforms per training sample (0 disables augmentation).
    pub augment: usize,
    /// Early-stopping patience in epochs (0 disables).
    pub patience: usize,
}

pub const CONFIG_KEYS: [&str; 23] = [
    "experiment", "seed", "group", "d", "n", "degree", "levels", "train", "val", "test", "lambda", "mu", "eta",
    "scheme", "covariance", "epsilon", "model", "widths", "lr", "epochs", "batch", "augment", "patience",
];

impl ExperimentConfig {
    /// Desk-scale defaults for an experiment.
    pub fn defaults(experiment: ExperimentKind) -> Self {
        let base = Self {
            experiment,
            seed: 0,
            group: MetricSignature::euclidean(3).expect("valid dimension"),
            d: 3,
            n: 10,
            degree: 5,
            levels: 3,
            train: 1024,
            val: 256,
            test: 256,
            lambda: 1.0,
            mu: 1.0,
            eta: 0.3,
            scheme: SamplingScheme::BernoulliRademacher,
            covariance: CovarianceKind::Random,
            epsilon: 0.25,
            model: ModelChoice::Equivariant,
            widths: vec![32, 32, 32],
            lr: 5e-4,
            epochs: 200,
            batch: 32,
            augment: 0,
            patience: 0,
        };
        match experiment {
            ExperimentKind::Signature => base,
            ExperimentKind::StressStrain => Self {
                n: 1,
                train: 2000,
                val: 500,
                test: 500,
                widths: vec![23, 23, 23],
                lr: 2e-3,
                epochs: 300,
                batch: 256,
                ..base
            },
            ExperimentKind::Sparse => Self {
                d: 5,
                n: 100,
                group: MetricSignature::euclidean(5).expect("valid dimension"),
                train: 2000,
                val: 500,
                test: 500,
                widths: vec![128, 128],
                lr: 3e-4,
                epochs: 30,
                batch: 100,
                patience: 20,
                ..base
            },
        }
    }

    /// Dimension of the vectors the data lives in.
    pub fn dim(&self) -> usize {
        match self.experiment {
            ExperimentKind::Signature => self.group.dim(),
            _ => self.d,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value', got '{line}'", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !CONFIG_KEYS.contains(&k) {
                return Err(Error::Config(format!("line {}: unknown key '{k}'", lineno + 1)));
            }
            if pairs.iter().any(|(p, _): &(&str, &str)| *p == k) {
                return Err(Error::Config(format!("line {}: duplicate key '{k}'", lineno + 1)));
            }
            pairs.push((k, v));
        }
        let experiment = match pairs.iter().find(|(k, _)| *k == "experiment") {
            Some((_, v)) => v.parse()?,
            None => return Err(Error::Config("missing required key 'experiment'".into())),
        };
        let mut cfg = Self::defaults(experiment);
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        if experiment == ExperimentKind::Sparse {
            cfg.group = MetricSignature::euclidean(cfg.d)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Overrides one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Config(format!("key '{key}': cannot parse '{v}'")))
        }
        match key {
            "experiment" => {
                let e: ExperimentKind = value.parse()?;
                if e != self.experiment {
                    return Err(Error::Config("experiment cannot change after defaults are chosen".into()));
                }
            }
            "seed" => self.seed = num(key, value)?,
            "group" => self.group = value.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            "d" => self.d = num(key, value)?,
            "n" => self.n = num(key, value)?,
            "degree" => self.degree = num(key, value)?,
            "levels" => self.levels = num(key, value)?,
            "train" => self.train = num(key, value)?,
            "val" => self.val = num(key, value)?,
            "test" => self.test = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "mu" => self.mu = num(key, value)?,
            "eta" => self.eta = num(key, value)?,
            "scheme" => self.scheme = value.parse()?,
            "covariance" => self.covariance = value.parse()?,
            "epsilon" => self.epsilon = num(key, value)?,
            "model" => self.model = value.parse()?,
            "widths" => {
                self.widths = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| num(key, s.trim()))
                    .collect::<Result<_>>()?
            }
            "lr" => self.lr = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "batch" => self.batch = num(key, value)?,
            "augment" => self.augment = num(key, value)?,
            "patience" => self.patience = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.train == 0 || self.test == 0 {
            return bad("train and test sizes must be positive".into());
        }
        if self.batch == 0 {
            return bad("batch must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if self.widths.iter().any(|w| *w == 0) {
            return bad("widths must be positive".into());
        }
        match self.experiment {
            ExperimentKind::Signature => {
                if self.n < 2 || self.degree == 0 || self.levels == 0 || self.levels > 4 {
                    return bad("signature needs n ≥ 2, degree ≥ 1 and 1 ≤ levels ≤ 4".into());
                }
                if self.group.is_symplectic() {
                    return bad("symplectic signature training is not provided".into());
                }
                if !matches!(self.model, ModelChoice::Equivariant | ModelChoice::Mlp | ModelChoice::MlpParams | ModelChoice::Discrete) {
                    return bad(format!("model {} does not apply to signatures", self.model));
                }
            }
            ExperimentKind::StressStrain => {
                if !(self.lambda > 0.0 && self.mu > 0.0 && self.eta > 0.0 && self.eta <= 0.5) {
                    return bad("stress needs λ, μ > 0 and η in (0, 0.5]".into());
                }
                if self.d == 0 {
                    return bad("d must be positive".into());
                }
                if !matches!(self.model, ModelChoice::Equivariant | ModelChoice::Mlp | ModelChoice::MlpParams) {
                    return bad(format!("model {} does not apply to stress", self.model));
                }
            }
            ExperimentKind::Sparse => {
                if self.d == 0 || self.d > self.n {
                    return bad(format!("sparse needs 1 ≤ d ≤ n, got d={}, n={}", self.d, self.n));
                }
                if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
                    return bad(format!("epsilon must lie in (0, 1], got {}", self.epsilon));
                }
                if self.scheme == SamplingScheme::CorrectedBernoulliGaussian && self.epsilon > 1.0 / 3.0 {
                    return bad("cbg sampling needs epsilon ≤ 1/3".into());
                }
                if matches!(self.model, ModelChoice::Discrete | ModelChoice::MlpParams) {
                    return bad(format!("model {} does not apply to sparse", self.model));
                }
            }
        }
        Ok(())
    }

    /// Text form that [`ExperimentConfig::parse`] reads back unchanged.
    pub fn to_text(&self) -> String {
        let widths: Vec<String> = self.widths.iter().map(|w| w.to_string()).collect();
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("experiment", self.experiment.to_string());
        kv("seed", self.seed.to_string());
        kv("group", self.group.to_string());
        kv("d", self.d.to_string());
        kv("n", self.n.to_string());
        kv("degree", self.degree.to_string());
        kv("levels", self.levels.to_string());
        kv("train", self.train.to_string());
        kv("val", self.val.to_string());
        kv("test", self.test.to_string());
        kv("lambda", self.lambda.to_string());
        kv("mu", self.mu.to_string());
        kv("eta", self.eta.to_string());
        kv("scheme", self.scheme.to_string());
        kv("covariance", self.covariance.to_string());
        kv("epsilon", self.epsilon.to_string());
        kv("model", self.model.to_string());
        kv("widths", widths.join(","));
        kv("lr", self.lr.to_string());
        kv("epochs", self.epochs.to_string());
        kv("batch", self.batch.to_string());
        kv("augment", self.augment.to_string());
        kv("patience", self.patience.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_round_trips() {
        let text = "# sparse run\nexperiment = sparse\nscheme = br\ncovariance = random\nn = 40\nd = 4\nepsilon = 0.25\nseed = 7\nwidths = 16, 16\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.scheme, SamplingScheme::BernoulliRademacher);
        assert_eq!(cfg.widths, vec![16, 16]);
        assert_eq!(cfg.group.dim(), 4);
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::parse("seed = 1\n").is_err());
        assert!(ExperimentConfig::parse("experiment = sparse\nbogus = 1\n").is_err());
        assert!(ExperimentConfig::parse("experiment = sparse\nn = x\n").is_err());
        assert!(ExperimentConfig::parse("experiment = sparse\nscheme = cbg\nepsilon = 0.5\n").is_err());
        assert!(ExperimentConfig::parse("experiment = stress\nmodel = sos-mao\n").is_err());
        assert!(ExperimentConfig::parse("experiment = signature\nseed = 1\nseed = 2\n").is_err());
    }

    #[test]
    fn lorentz_signature_uses_four_dimensions() {
        let cfg = ExperimentConfig::parse("experiment = signature\ngroup = lorentz\n").unwrap();
        assert_eq!(cfg.dim(), 4);
    }
}
