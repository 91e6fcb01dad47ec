//! Model checkpoints.
//!
//! Layout (little-endian): `b"EQM1"`, `u32` version, `u32` model kind, `u32`
//! count plus that many `f64` normalization constants, then a kind-specific
//! body. Vectors-to-tensor bodies list every term as `(t, k, σ[k], m, J[m])`
//! before the network weights, so a reader can check the basis it rebuilds.

use std::io::{Read, Write};

use super::eigen::{EigenEquivariantModel, SpectrumScaling};
use super::vec_to_tensor::{CoeffNet, CoeffNetSpec, FeatureMode, VecModelOptions, VecToTensorModel};
use crate::error::{Error, Result};
use crate::nn::{Activation, DenseNet, PermEquivariantNet, PolynomialNet};
use crate::perm::Permutation;
use crate::tensor::{MetricKind, MetricSignature};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"EQM1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum SavedModel {
    VecToTensor(VecToTensorModel),
    Eigen(EigenEquivariantModel),
    Mlp(DenseNet),
}

impl SavedModel {
    fn kind(&self) -> u32 {
        match self {
            SavedModel::VecToTensor(_) => 0,
            SavedModel::Eigen(_) => 1,
            SavedModel::Mlp(_) => 2,
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            SavedModel::VecToTensor(m) => m.params(),
            SavedModel::Eigen(m) => m.params(),
            SavedModel::Mlp(m) => m.params(),
        }
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        match self {
            SavedModel::VecToTensor(m) => m.params_mut(),
            SavedModel::Eigen(m) => m.params_mut(),
            SavedModel::Mlp(m) => m.params_mut(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: SavedModel,
    /// Experiment-defined data normalization constants.
    pub normalization: Vec<f64>,
}

struct Out<'a, W: Write>(&'a mut W);

impl<W: Write> Out<'_, W> {
    fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }

    fn f64(&mut self, v: f64) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }

    fn f64s(&mut self, v: &[f64]) -> Result<()> {
        self.u32(v.len())?;
        v.iter().try_for_each(|x| self.f64(*x))
    }

    fn usizes(&mut self, v: &[usize]) -> Result<()> {
        self.u32(v.len())?;
        v.iter().try_for_each(|x| self.u32(*x))
    }
}

struct In<'a, R: Read>(&'a mut R);

impl<R: Read> In<'_, R> {
    fn u32(&mut self) -> Result<usize> {
        let mut b = [0u8; 4];
        self.0.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.0.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }

    fn len(&mut self) -> Result<usize> {
        let n = self.u32()?;
        if n > 1 << 26 {
            return Err(Error::Format(format!("implausible length {n}")));
        }
        Ok(n)
    }

    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len()?;
        (0..n).map(|_| self.f64()).collect()
    }

    fn usizes(&mut self) -> Result<Vec<usize>> {
        let n = self.len()?;
        (0..n).map(|_| self.u32()).collect()
    }

    fn activation(&mut self) -> Result<Activation> {
        let c = self.u32()? as u32;
        Activation::from_code(c).ok_or_else(|| Error::Format(format!("unknown activation code {c}")))
    }
}

fn write_metric<W: Write>(o: &mut Out<W>, m: &MetricSignature) -> Result<()> {
    match m.kind() {
        MetricKind::Euclidean { dim } => {
            o.u32(0)?;
            o.u32(dim)?;
            o.u32(0)
        }
        MetricKind::Minkowski { positive, negative } => {
            o.u32(1)?;
            o.u32(positive)?;
            o.u32(negative)
        }
        MetricKind::Symplectic { dim } => {
            o.u32(2)?;
            o.u32(dim)?;
            o.u32(0)
        }
    }
}

fn read_metric<R: Read>(i: &mut In<R>) -> Result<MetricSignature> {
    let (kind, a, b) = (i.u32()?, i.u32()?, i.u32()?);
    match kind {
        0 => MetricSignature::euclidean(a),
        1 => MetricSignature::minkowski(a, b),
        2 => MetricSignature::symplectic(a),
        _ => Err(Error::Format(format!("unknown metric code {kind}"))),
    }
}

pub fn write_checkpoint<W: Write>(w: &mut W, ckpt: &Checkpoint) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    let mut o = Out(w);
    o.u32(CHECKPOINT_VERSION as usize)?;
    o.u32(ckpt.model.kind() as usize)?;
    o.f64s(&ckpt.normalization)?;
    match &ckpt.model {
        SavedModel::VecToTensor(m) => {
            let opts = m.options();
            o.u32(opts.n)?;
            write_metric(&mut o, &opts.metric)?;
            o.usizes(&opts.orders)?;
            o.u32(opts.symmetric_output as usize)?;
            o.u32(opts.diagonal_terms_only as usize)?;
            o.u32(match opts.features {
                FeatureMode::Gram => 0,
                FeatureMode::Norms => 1,
            })?;
            o.f64(opts.feature_scale)?;
            match m.net() {
                CoeffNet::Dense(net) => {
                    o.u32(0)?;
                    o.usizes(net.widths())?;
                    o.u32(net.activation().code() as usize)?;
                }
                CoeffNet::Polynomial(p) => {
                    o.u32(1)?;
                    o.u32(p.degree())?;
                }
            }
            o.u32(m.num_terms())?;
            for h in m.heads() {
                for g in &h.groups {
                    let t = &g.representative;
                    o.u32(t.t)?;
                    o.usizes(t.sigma.images())?;
                    o.usizes(&t.j)?;
                }
            }
            o.f64s(m.params())
        }
        SavedModel::Eigen(m) => {
            o.u32(m.dim())?;
            o.usizes(m.net().channels())?;
            o.u32(m.net().activation().code() as usize)?;
            let s = m.scaling;
            for v in [s.input_mean, s.input_std, s.output_mean, s.output_std] {
                o.f64(v)?;
            }
            o.f64s(m.params())
        }
        SavedModel::Mlp(net) => {
            o.usizes(net.widths())?;
            o.u32(net.activation().code() as usize)?;
            o.f64s(net.params())
        }
    }
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<Checkpoint> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a checkpoint file".into()));
    }
    let mut i = In(r);
    let version = i.u32()?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let kind = i.u32()?;
    let normalization = i.f64s()?;
    let model = match kind {
        0 => {
            let n = i.u32()?;
            let metric = read_metric(&mut i)?;
            let orders = i.usizes()?;
            let symmetric_output = i.u32()? != 0;
            let diagonal_terms_only = i.u32()? != 0;
            let features = match i.u32()? {
                0 => FeatureMode::Gram,
                1 => FeatureMode::Norms,
                c => return Err(Error::Format(format!("unknown feature mode {c}"))),
            };
            let feature_scale = i.f64()?;
            let (net_spec, widths, activation, degree) = match i.u32()? {
                0 => {
                    let widths = i.usizes()?;
                    let act = i.activation()?;
                    if widths.len() < 2 {
                        return Err(Error::Format("network needs at least two layers".into()));
                    }
                    let hidden = widths[1..widths.len() - 1].to_vec();
                    (CoeffNetSpec::Dense { hidden, activation: act }, widths, act, 0)
                }
                1 => {
                    let degree = i.u32()?;
                    (CoeffNetSpec::Polynomial { degree }, Vec::new(), Activation::Identity, degree)
                }
                c => return Err(Error::Format(format!("unknown network kind {c}"))),
            };
            let count = i.len()?;
            let mut terms = Vec::with_capacity(count);
            for _ in 0..count {
                let t = i.u32()?;
                let sigma = Permutation::new(i.usizes()?).map_err(|e| Error::Format(e.to_string()))?;
                let j = i.usizes()?;
                terms.push((t, sigma, j));
            }
            let params = i.f64s()?;
            let options = VecModelOptions {
                n,
                metric,
                orders,
                symmetric_output,
                diagonal_terms_only,
                features,
                feature_scale,
                net: net_spec,
            };
            let inputs = super::vec_to_tensor::feature_count(n, &metric, features);
            let net = match &options.net {
                CoeffNetSpec::Dense { .. } => CoeffNet::Dense(DenseNet::from_params(&widths, activation, params)?),
                CoeffNetSpec::Polynomial { .. } => {
                    CoeffNet::Polynomial(PolynomialNet::from_params(inputs, count, degree, params)?)
                }
            };
            let model = VecToTensorModel::from_parts(options, net)?;
            let rebuilt: Vec<_> = model.heads().iter().flat_map(|h| h.groups.iter().map(|g| &g.representative)).collect();
            if rebuilt.len() != terms.len()
                || rebuilt.iter().zip(&terms).any(|(a, (t, s, j))| a.t != *t || &a.sigma != s || &a.j != j)
            {
                return Err(Error::Format("stored term list does not match the rebuilt basis".into()));
            }
            SavedModel::VecToTensor(model)
        }
        1 => {
            let dim = i.u32()?;
            let channels = i.usizes()?;
            let act = i.activation()?;
            let scaling = SpectrumScaling {
                input_mean: i.f64()?,
                input_std: i.f64()?,
                output_mean: i.f64()?,
                output_std: i.f64()?,
            };
            let params = i.f64s()?;
            let net = PermEquivariantNet::from_params(&channels, act, params)?;
            SavedModel::Eigen(EigenEquivariantModel::from_net(dim, net, scaling)?)
        }
        2 => {
            let widths = i.usizes()?;
            let act = i.activation()?;
            SavedModel::Mlp(DenseNet::from_params(&widths, act, i.f64s()?)?)
        }
        k => return Err(Error::Format(format!("unknown model kind {k}"))),
    };
    Ok(Checkpoint { model, normalization })
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_checkpoint(&mut out, ckpt)?;
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut cursor = bytes;
    let c = read_checkpoint(&mut cursor)?;
    if !cursor.is_empty() {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn round_trip(c: Checkpoint) {
        let bytes = encode_checkpoint(&c).unwrap();
        let back = decode_checkpoint(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(encode_checkpoint(&back).unwrap(), bytes);
    }

    #[test]
    fn vec_models_round_trip() {
        let mut rng = seeded(50);
        let dense = CoeffNetSpec::Dense { hidden: vec![7], activation: Activation::Gelu };
        let mut opts = VecModelOptions::new(3, MetricSignature::lorentz(), vec![1, 2], dense);
        opts.symmetric_output = true;
        let m = VecToTensorModel::new(opts, &mut rng).unwrap();
        round_trip(Checkpoint { model: SavedModel::VecToTensor(m), normalization: vec![1.0, 0.5] });
        let poly = VecModelOptions::new(2, MetricSignature::symplectic(2).unwrap(), vec![2], CoeffNetSpec::Polynomial { degree: 2 });
        let m = VecToTensorModel::new(poly, &mut rng).unwrap();
        round_trip(Checkpoint { model: SavedModel::VecToTensor(m), normalization: vec![] });
    }

    #[test]
    fn other_models_round_trip() {
        let mut rng = seeded(51);
        let mut e = EigenEquivariantModel::new(3, &[4, 4], Activation::Relu, &mut rng).unwrap();
        e.scaling.input_std = 2.5;
        round_trip(Checkpoint { model: SavedModel::Eigen(e), normalization: vec![3.0] });
        let mlp = DenseNet::new(&[9, 8, 9], Activation::Gelu, &mut rng).unwrap();
        round_trip(Checkpoint { model: SavedModel::Mlp(mlp), normalization: vec![] });
    }

    #[test]
    fn rejects_corrupted_files() {
        let mut rng = seeded(52);
        let mlp = DenseNet::new(&[2, 2], Activation::Gelu, &mut rng).unwrap();
        let bytes = encode_checkpoint(&Checkpoint { model: SavedModel::Mlp(mlp), normalization: vec![] }).unwrap();
        assert!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_checkpoint(&bad).is_err());
    }
}
