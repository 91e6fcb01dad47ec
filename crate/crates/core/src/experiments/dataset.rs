//! Generated datasets and the `EQD1` file format.
//!
//! Layout (little-endian): `b"EQD1"`, `u32` version, `u32` length plus UTF-8
//! experiment tag, `u32` length plus UTF-8 metric, `u32` train/val/test
//! counts, `u32` d, `u32` n, `u32` count plus `u32` orders, `u32` count plus
//! `f64` generation parameters, `u32` record length, then every record of
//! train, val and test as packed `f64`.
//!
//! Records: signature `points (n·d) ‖ S_1 ‖ … ‖ S_M`; stress `C (d²) ‖ S (d²)`;
//! sparse `rows (n·d) ‖ v (n)`.

use std::io::{Read, Write};

use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind};
use super::neohookean::gen_neohookean;
use super::signature::gen_poly_path;
use super::sparse::{gen_sparse_instance, NoiseCovariance};
use crate::error::{Error, Result};
use crate::rng::{domain, substream};
use crate::tensor::MetricSignature;

pub const DATASET_MAGIC: &[u8; 4] = b"EQD1";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    fn domain(self) -> u64 {
        match self {
            Split::Train => domain::TRAIN,
            Split::Val => domain::VAL,
            Split::Test => domain::TEST,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetHeader {
    pub experiment: ExperimentKind,
    pub metric: MetricSignature,
    pub d: usize,
    pub n: usize,
    pub orders: Vec<usize>,
    /// Signature: degree. Stress: λ, μ, η. Sparse: ε.
    pub params: Vec<f64>,
}

impl DatasetHeader {
    pub fn record_len(&self) -> usize {
        let (n, d) = (self.n, self.d);
        match self.experiment {
            ExperimentKind::Signature => n * d + self.orders.iter().map(|k| d.pow(*k as u32)).sum::<usize>(),
            ExperimentKind::StressStrain => 2 * d * d,
            ExperimentKind::Sparse => n * d + n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    splits: [Vec<Vec<f64>>; 3],
}

impl Dataset {
    pub fn new(header: DatasetHeader, train: Vec<Vec<f64>>, val: Vec<Vec<f64>>, test: Vec<Vec<f64>>) -> Result<Self> {
        let len = header.record_len();
        for r in train.iter().chain(&val).chain(&test) {
            if r.len() != len {
                return Err(Error::BadLength { expected: len, got: r.len() });
            }
        }
        Ok(Self { header, splits: [train, val, test] })
    }

    pub fn split(&self, s: Split) -> &[Vec<f64>] {
        &self.splits[s.index()]
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        let h = &self.header;
        let u32le = |w: &mut W, v: usize| -> Result<()> {
            let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
            Ok(w.write_all(&v.to_le_bytes())?)
        };
        w.write_all(DATASET_MAGIC)?;
        u32le(w, DATASET_VERSION as usize)?;
        for text in [h.experiment.to_string(), h.metric.to_string()] {
            u32le(w, text.len())?;
            w.write_all(text.as_bytes())?;
        }
        for s in &self.splits {
            u32le(w, s.len())?;
        }
        u32le(w, h.d)?;
        u32le(w, h.n)?;
        u32le(w, h.orders.len())?;
        for o in &h.orders {
            u32le(w, *o)?;
        }
        u32le(w, h.params.len())?;
        for p in &h.params {
            w.write_all(&p.to_le_bytes())?;
        }
        u32le(w, h.record_len())?;
        for r in self.splits.iter().flatten() {
            for x in r {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != DATASET_MAGIC {
            return Err(Error::Format("not a dataset file".into()));
        }
        let version = read_u32(r)?;
        if version != DATASET_VERSION as usize {
            return Err(Error::Format(format!("unsupported dataset version {version}")));
        }
        let experiment: ExperimentKind = read_text(r)?.parse().map_err(|e: Error| Error::Format(e.to_string()))?;
        let metric: MetricSignature = read_text(r)?.parse().map_err(|e: Error| Error::Format(e.to_string()))?;
        let counts = [read_u32(r)?, read_u32(r)?, read_u32(r)?];
        let d = read_u32(r)?;
        let n = read_u32(r)?;
        let norders = read_u32(r)?;
        let orders = (0..norders).map(|_| read_u32(r)).collect::<Result<Vec<_>>>()?;
        let nparams = read_u32(r)?;
        let params = (0..nparams).map(|_| read_f64(r)).collect::<Result<Vec<_>>>()?;
        let header = DatasetHeader { experiment, metric, d, n, orders, params };
        let stored = read_u32(r)?;
        if stored != header.record_len() {
            return Err(Error::Format(format!("record length {stored} does not match header ({})", header.record_len())));
        }
        let mut splits: [Vec<Vec<f64>>; 3] = Default::default();
        for (s, &count) in splits.iter_mut().zip(&counts) {
            for _ in 0..count {
                s.push((0..stored).map(|_| read_f64(r)).collect::<Result<Vec<_>>>()?);
            }
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Format("trailing bytes after dataset".into()));
        }
        let [train, val, test] = splits;
        Dataset::new(header, train, val, test)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        self.write(&mut out)?;
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = bytes;
        Self::read(&mut cursor)
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<usize> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b) as usize)
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_text<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u32(r)?;
    if len > 256 {
        return Err(Error::Format("header string too long".into()));
    }
    let mut b = vec![0u8; len];
    r.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|_| Error::Format("header string is not UTF-8".into()))
}

fn generate_split<F>(count: usize, seed: u64, split: Split, make: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&mut crate::rng::Rng) -> Result<Vec<f64>> + Sync,
{
    (0..count)
        .into_par_iter()
        .map(|i| make(&mut substream(seed, split.domain(), i as u64)))
        .collect()
}

/// Builds train/val/test data for a config. Each record draws from its own
/// stream, so results do not depend on the thread count.
pub fn generate_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    cfg.validate()?;
    let d = cfg.dim();
    let counts = [cfg.train, cfg.val, cfg.test];
    let (header, make): (DatasetHeader, Box<dyn Fn(&mut crate::rng::Rng) -> Result<Vec<f64>> + Sync>) = match cfg.experiment {
        ExperimentKind::Signature => {
            let (n, degree, levels) = (cfg.n, cfg.degree, cfg.levels);
            let header = DatasetHeader {
                experiment: cfg.experiment,
                metric: cfg.group,
                d,
                n,
                orders: (1..=levels).collect(),
                params: vec![degree as f64],
            };
            let make = move |rng: &mut crate::rng::Rng| -> Result<Vec<f64>> {
                let p = gen_poly_path(rng, d, degree, n, levels)?;
                let mut rec: Vec<f64> = p.points.iter().flat_map(|x| x.components().to_vec()).collect();
                for s in &p.signature {
                    rec.extend_from_slice(s.components());
                }
                Ok(rec)
            };
            (header, Box::new(make))
        }
        ExperimentKind::StressStrain => {
            let (lambda, mu, eta) = (cfg.lambda, cfg.mu, cfg.eta);
            let header = DatasetHeader {
                experiment: cfg.experiment,
                metric: MetricSignature::euclidean(d)?,
                d,
                n: 1,
                orders: vec![2],
                params: vec![lambda, mu, eta],
            };
            let make = move |rng: &mut crate::rng::Rng| -> Result<Vec<f64>> {
                let s = gen_neohookean(rng, d, lambda, mu, eta)?;
                let mut rec = s.strain.components().to_vec();
                rec.extend_from_slice(s.stress.components());
                Ok(rec)
            };
            (header, Box::new(make))
        }
        ExperimentKind::Sparse => {
            let (n, scheme, eps) = (cfg.n, cfg.scheme, cfg.epsilon);
            let cov = NoiseCovariance::sample(cfg.covariance, n, &mut substream(cfg.seed, domain::EXPERIMENT, 0));
            let header = DatasetHeader {
                experiment: cfg.experiment,
                metric: MetricSignature::euclidean(d)?,
                d,
                n,
                orders: vec![2],
                params: vec![eps],
            };
            let make = move |rng: &mut crate::rng::Rng| -> Result<Vec<f64>> {
                let inst = gen_sparse_instance(rng, scheme, &cov, d, eps)?;
                let mut rec = inst.rows();
                rec.extend(inst.target.iter());
                Ok(rec)
            };
            (header, Box::new(make))
        }
    };
    let mut splits = Split::ALL.iter().zip(counts).map(|(s, c)| generate_split(c, cfg.seed, *s, &make));
    let train = splits.next().expect("three splits")?;
    let val = splits.next().expect("three splits")?;
    let test = splits.next().expect("three splits")?;
    Dataset::new(header, train, val, test)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ExperimentKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::defaults(kind);
        c.train = 6;
        c.val = 2;
        c.test = 3;
        if kind == ExperimentKind::Sparse {
            c.n = 20;
        }
        c.seed = 11;
        c
    }

    #[test]
    fn generation_is_deterministic_and_round_trips() {
        for kind in [ExperimentKind::Signature, ExperimentKind::StressStrain, ExperimentKind::Sparse] {
            let a = generate_dataset(&small(kind)).unwrap();
            let b = generate_dataset(&small(kind)).unwrap();
            let bytes = a.to_bytes().unwrap();
            assert_eq!(bytes, b.to_bytes().unwrap());
            assert_eq!(Dataset::from_bytes(&bytes).unwrap(), a);
            assert_eq!(a.split(Split::Test).len(), 3);
        }
    }

    #[test]
    fn seeds_change_the_data() {
        let mut c = small(ExperimentKind::StressStrain);
        let a = generate_dataset(&c).unwrap();
        c.seed = 12;
        assert_ne!(a, generate_dataset(&c).unwrap());
    }

    #[test]
    fn rejects_corruption() {
        let a = generate_dataset(&small(ExperimentKind::StressStrain)).unwrap();
        let bytes = a.to_bytes().unwrap();
        assert!(Dataset::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Dataset::from_bytes(&extra).is_err());
        assert!(Dataset::from_bytes(b"EQD0").is_err());
    }
}
