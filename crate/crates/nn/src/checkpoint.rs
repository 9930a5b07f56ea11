//! Versioned binary checkpoints.
//!
//! Layout (little endian): magic `AOANET`, u16 version, u32 header length,
//! JSON header, then the trainable parameters as f32 in [`Network::params`]
//! order, the batchnorm running means and variances as f32, and the feature
//! scaler means and standard deviations as f64.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use aoa_core::covariance::StandardScaler;
use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::network::{ModelSpec, Network};
use crate::predict::Predictor;

pub const MAGIC: &[u8; 6] = b"AOANET";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    spec: ModelSpec,
    param_count: usize,
    running_count: usize,
    scaler_dim: usize,
    threshold: f64,
}

fn bad(msg: impl Into<String>) -> NnError {
    NnError::Checkpoint(msg.into())
}

pub fn write_checkpoint<W: Write>(predictor: &Predictor, mut w: W) -> Result<()> {
    let net = &predictor.network;
    let header = Header {
        spec: net.spec.clone(),
        param_count: net.param_count(),
        running_count: net.non_trainable_count(),
        scaler_dim: predictor.scaler.dim(),
        threshold: predictor.threshold,
    };
    let json = serde_json::to_vec(&header).map_err(|e| bad(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_u16::<LE>(VERSION)?;
    w.write_u32::<LE>(json.len() as u32)?;
    w.write_all(&json)?;
    for p in net.params() {
        for &v in p.iter() {
            w.write_f32::<LE>(v)?;
        }
    }
    let mut net = net.clone();
    for bn in net.batchnorms_mut() {
        for &v in bn.running_mean.iter().chain(bn.running_var.iter()) {
            w.write_f32::<LE>(v)?;
        }
    }
    for &v in predictor.scaler.mean.iter().chain(&predictor.scaler.std) {
        w.write_f64::<LE>(v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Predictor> {
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic).map_err(|_| bad("truncated magic"))?;
    if &magic != MAGIC {
        return Err(bad("not a network checkpoint"));
    }
    let version = r.read_u16::<LE>()?;
    if version != VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let len = r.read_u32::<LE>()? as usize;
    if len > 1 << 20 {
        return Err(bad("header too large"));
    }
    let mut json = vec![0u8; len];
    r.read_exact(&mut json).map_err(|_| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(&json).map_err(|e| bad(e.to_string()))?;
    let mut net = Network::<f32>::zeros(header.spec.clone()).map_err(|e| bad(e.to_string()))?;
    if net.param_count() != header.param_count || net.non_trainable_count() != header.running_count {
        return Err(bad("parameter count disagrees with the architecture"));
    }
    let trunc = |_| bad("truncated parameter data");
    for mut p in net.params_mut() {
        for v in p.iter_mut() {
            *v = r.read_f32::<LE>().map_err(trunc)?;
        }
    }
    for bn in net.batchnorms_mut() {
        for v in bn.running_mean.iter_mut().chain(bn.running_var.iter_mut()) {
            *v = r.read_f32::<LE>().map_err(trunc)?;
        }
    }
    let mut read_vec = |n: usize| -> Result<Vec<f64>> {
        (0..n).map(|_| r.read_f64::<LE>().map_err(trunc)).collect()
    };
    let mean = read_vec(header.scaler_dim)?;
    let std = read_vec(header.scaler_dim)?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(bad("trailing bytes"));
    }
    if net.params().iter().any(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(bad("non-finite parameters"));
    }
    Ok(Predictor::new(net, StandardScaler { mean, std })?.with_threshold(header.threshold))
}

pub fn save(predictor: &Predictor, path: impl AsRef<Path>) -> Result<()> {
    write_checkpoint(predictor, BufWriter::new(File::create(path)?))
}

pub fn load(path: impl AsRef<Path>) -> Result<Predictor> {
    read_checkpoint(BufReader::new(File::open(path)?))
}
