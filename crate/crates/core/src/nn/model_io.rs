//! Model files: magic "WIIM", version u16, precision byte (4 or 8), one
//! reserved byte, length-prefixed canonical JSON for the config and the
//! training log, then the weight tensors (rank, dims, little-endian data).

use std::fs;
use std::path::Path;

use super::{EpochLog, Network, NetworkConfig, Precision, Scalar, Tensor};
use crate::config::canonical_json;
use crate::error::{Error, FormatError, Result};
use crate::signal::IqSnapshot;

pub const MODEL_MAGIC: [u8; 4] = *b"WIIM";
pub const MODEL_VERSION: u16 = 1;

/// A loaded model of either precision.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    F32(Network<f32>),
    F64(Network<f64>),
}

macro_rules! dispatch {
    ($self:ident, $net:ident => $e:expr) => {
        match $self {
            AnyModel::F32($net) => $e,
            AnyModel::F64($net) => $e,
        }
    };
}

impl AnyModel {
    pub fn precision(&self) -> Precision {
        match self {
            AnyModel::F32(_) => Precision::F32,
            AnyModel::F64(_) => Precision::F64,
        }
    }

    pub fn config(&self) -> &NetworkConfig {
        dispatch!(self, n => n.config())
    }

    pub fn training_log(&self) -> &[EpochLog] {
        dispatch!(self, n => &n.training_log)
    }

    pub fn input_len(&self) -> usize {
        dispatch!(self, n => n.input_len())
    }

    pub fn output_len(&self) -> usize {
        dispatch!(self, n => n.output_len())
    }

    pub fn predict(&self, snapshot: &IqSnapshot) -> Result<Vec<f64>> {
        dispatch!(self, n => n.predict(snapshot))
    }

    pub fn predict_batch(&self, inputs: &[f32]) -> Result<Vec<f64>> {
        dispatch!(self, n => n.predict_batch(inputs))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        dispatch!(self, n => save_model(n, path))
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::InvalidArgument(format!("{v} does not fit the model format")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub fn encode_model<S: Scalar>(net: &Network<S>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(&MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.push(S::BYTES as u8);
    out.push(0);
    for json in [canonical_json(net.config())?, canonical_json(&net.training_log)?] {
        put_u32(&mut out, json.len())?;
        out.extend_from_slice(json.as_bytes());
    }
    put_u32(&mut out, net.params().len())?;
    for t in net.params() {
        put_u32(&mut out, t.shape().len())?;
        for &d in t.shape() {
            put_u32(&mut out, d)?;
        }
        out.reserve(t.len() * S::BYTES);
        t.data().iter().for_each(|v| v.write_le(&mut out));
    }
    Ok(out)
}

pub fn save_model<S: Scalar>(net: &Network<S>, path: &Path) -> Result<()> {
    fs::write(path, encode_model(net)?)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.at < n {
            return Err(FormatError::Truncated(format!("model file ends inside {what}")).into());
        }
        self.at += n;
        Ok(&self.bytes[self.at - n..self.at])
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()) as usize)
    }
}

fn decode_network<S: Scalar>(cur: &mut Cursor) -> Result<Network<S>> {
    let len = cur.u32("config length")?;
    let config: NetworkConfig = serde_json::from_slice(cur.take(len, "config")?)?;
    let len = cur.u32("training log length")?;
    let log: Vec<EpochLog> = serde_json::from_slice(cur.take(len, "training log")?)?;
    let expected = config.param_shapes()?;
    let count = cur.u32("tensor count")?;
    if count != expected.len() {
        return Err(FormatError::Malformed(format!("file holds {count} weight tensors, config needs {}", expected.len())).into());
    }
    let mut params = Vec::with_capacity(count);
    for (i, want) in expected.iter().enumerate() {
        let rank = cur.u32("tensor rank")?;
        let shape = (0..rank).map(|_| cur.u32("tensor shape")).collect::<Result<Vec<_>>>()?;
        if &shape != want {
            return Err(FormatError::Malformed(format!("tensor {i} has shape {shape:?}, config needs {want:?}")).into());
        }
        let n: usize = shape.iter().product();
        let raw = cur.take(n * S::BYTES, "tensor data")?;
        params.push(Tensor::new(shape, raw.chunks_exact(S::BYTES).map(S::read_le).collect())?);
    }
    if cur.at != cur.bytes.len() {
        return Err(FormatError::Malformed(format!("{} trailing bytes", cur.bytes.len() - cur.at)).into());
    }
    Network::from_params(config, params, log)
}

pub fn decode_model(bytes: &[u8]) -> Result<AnyModel> {
    let mut cur = Cursor { bytes, at: 0 };
    let magic: [u8; 4] = cur.take(4, "magic")?.try_into().unwrap();
    if magic != MODEL_MAGIC {
        return Err(FormatError::BadMagic { expected: MODEL_MAGIC, found: magic }.into());
    }
    let version = u16::from_le_bytes(cur.take(2, "version")?.try_into().unwrap());
    if version != MODEL_VERSION {
        return Err(FormatError::UnsupportedVersion { found: version, supported: MODEL_VERSION }.into());
    }
    let header = cur.take(2, "precision")?;
    match header[0] {
        4 => Ok(AnyModel::F32(decode_network(&mut cur)?)),
        8 => Ok(AnyModel::F64(decode_network(&mut cur)?)),
        p => Err(FormatError::Malformed(format!("unknown precision byte {p}")).into()),
    }
}

pub fn load_model(path: &Path) -> Result<AnyModel> {
    decode_model(&fs::read(path)?)
}
