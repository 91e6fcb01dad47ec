use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Which bilinear form a metric describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricKind {
    Euclidean { dim: usize },
    /// `positive` leading `+1` entries followed by `negative` `-1` entries.
    Minkowski { positive: usize, negative: usize },
    Symplectic { dim: usize },
}

/// A validated metric signature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MetricSignature {
    kind: MetricKind,
}

impl MetricSignature {
    pub fn euclidean(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMetric("dimension must be positive".into()));
        }
        Ok(Self { kind: MetricKind::Euclidean { dim } })
    }

    pub fn minkowski(positive: usize, negative: usize) -> Result<Self> {
        if positive == 0 || negative == 0 {
            return Err(Error::InvalidMetric(format!(
                "minkowski signature ({positive},{negative}) needs both parts positive"
            )));
        }
        Ok(Self { kind: MetricKind::Minkowski { positive, negative } })
    }

    /// The `(1,3)` signature with time first.
    pub fn lorentz() -> Self {
        Self { kind: MetricKind::Minkowski { positive: 1, negative: 3 } }
    }

    pub fn symplectic(dim: usize) -> Result<Self> {
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::InvalidMetric(format!("symplectic dimension {dim} must be even and positive")));
        }
        Ok(Self { kind: MetricKind::Symplectic { dim } })
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            MetricKind::Euclidean { dim } | MetricKind::Symplectic { dim } => dim,
            MetricKind::Minkowski { positive, negative } => positive + negative,
        }
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self.kind, MetricKind::Euclidean { .. })
    }

    pub fn is_symplectic(&self) -> bool {
        matches!(self.kind, MetricKind::Symplectic { .. })
    }

    /// Row `i` of the metric matrix has a single nonzero entry.
    /// Returns its column and value.
    pub fn pairing(&self, i: usize) -> (usize, f64) {
        match self.kind {
            MetricKind::Euclidean { .. } => (i, 1.0),
            MetricKind::Minkowski { positive, .. } => (i, if i < positive { 1.0 } else { -1.0 }),
            MetricKind::Symplectic { dim } => {
                let half = dim / 2;
                if i < half {
                    (i + half, 1.0)
                } else {
                    (i - half, -1.0)
                }
            }
        }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            let (j, s) = self.pairing(i);
            m[(i, j)] = s;
        }
        m
    }

    /// `uᵀ θ v` for plain component slices.
    pub fn form(&self, u: &[f64], v: &[f64]) -> f64 {
        (0..self.dim())
            .map(|i| {
                let (j, s) = self.pairing(i);
                s * u[i] * v[j]
            })
            .sum()
    }
}

impl fmt::Display for MetricSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            MetricKind::Euclidean { dim } => write!(f, "euclidean:{dim}"),
            MetricKind::Minkowski { positive, negative } => write!(f, "minkowski:{positive},{negative}"),
            MetricKind::Symplectic { dim } => write!(f, "symplectic:{dim}"),
        }
    }
}

/// Parses `euclidean:3`, `minkowski:1,3`, `symplectic:4`.
/// The shorthands `o<d>`, `lorentz` and `sp<d>` are accepted too.
impl FromStr for MetricSignature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let bad = || Error::InvalidMetric(format!("cannot parse metric '{s}'"));
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        if s == "lorentz" {
            return Ok(Self::lorentz());
        }
        if let Some((name, rest)) = s.split_once(':') {
            return match name {
                "euclidean" | "o" => Self::euclidean(num(rest)?),
                "symplectic" | "sp" => Self::symplectic(num(rest)?),
                "minkowski" => {
                    let (p, q) = rest.split_once(',').ok_or_else(bad)?;
                    Self::minkowski(num(p)?, num(q)?)
                }
                _ => Err(bad()),
            };
        }
        if let Some(rest) = s.strip_prefix("sp") {
            return Self::symplectic(num(rest)?);
        }
        if let Some(rest) = s.strip_prefix('o') {
            return Self::euclidean(num(rest)?);
        }
        Err(bad())
    }
}
