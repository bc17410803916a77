//! Binary checkpoint files.
//!
//! Layout, all integers little-endian:
//!
//! | field            | encoding                                           |
//! |------------------|----------------------------------------------------|
//! | magic            | `b"RLFK"`                                          |
//! | version          | `u32` (currently 1)                                |
//! | config hash      | `u64`, first 8 bytes of SHA-256 over fingerprints  |
//! | tensor count     | `u32`                                              |
//! | tensors          | per tensor: `u32` rank, `u64` dims, `f64` values   |
//! | optimizer count  | `u32`, one entry per network                       |
//! | optimizer state  | `u8` kind (0 sgd, 1 adam); adam adds `u64` t, then |
//! |                  | `u32` count + tensors for m, same again for v      |
//! | step counter     | `u64`                                              |
//!
//! Trailing bytes are rejected.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::dense::Tensor;
use super::network::PolicyNetwork;
use super::optim::OptimizerState;
use super::NetError;

pub const MAGIC: &[u8; 4] = b"RLFK";
pub const VERSION: u32 = 1;

pub fn config_hash(net: &PolicyNetwork) -> u64 {
    let mut hasher = Sha256::new();
    for c in net.configs() {
        hasher.update(c.fingerprint().as_bytes());
        hasher.update([0u8]);
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

fn put_tensor(out: &mut Vec<u8>, t: &Tensor) {
    out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
    for &d in &t.shape {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in &t.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn put_tensors<'a>(out: &mut Vec<u8>, ts: impl ExactSizeIterator<Item = &'a Tensor>) {
    out.extend_from_slice(&(ts.len() as u32).to_le_bytes());
    for t in ts {
        put_tensor(out, t);
    }
}

pub fn encode(net: &PolicyNetwork) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&config_hash(net).to_le_bytes());
    let params = net.params();
    put_tensors(&mut out, params.into_iter());
    out.extend_from_slice(&(net.optimizers().len() as u32).to_le_bytes());
    for opt in net.optimizers() {
        match opt {
            OptimizerState::Sgd => out.push(0),
            OptimizerState::Adam { t, m, v } => {
                out.push(1);
                out.extend_from_slice(&t.to_le_bytes());
                put_tensors(&mut out, m.iter());
                put_tensors(&mut out, v.iter());
            }
        }
    }
    out.extend_from_slice(&net.step_counter().to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NetError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| NetError::Format(format!("truncated at byte {}", self.pos)))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, NetError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, NetError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, NetError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn tensor(&mut self) -> Result<Tensor, NetError> {
        let rank = self.u32()? as usize;
        if rank > 8 {
            return Err(NetError::Format(format!("implausible tensor rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(self.u64()? as usize);
        }
        let len = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&n| n.checked_mul(8).is_some_and(|b| b <= self.bytes.len()))
            .ok_or_else(|| NetError::Format("tensor size exceeds file".into()))?;
        let raw = self.take(len * 8)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Tensor { shape, data })
    }

    fn tensors(&mut self) -> Result<Vec<Tensor>, NetError> {
        let n = self.u32()? as usize;
        if n > self.bytes.len() {
            return Err(NetError::Format("tensor count exceeds file".into()));
        }
        (0..n).map(|_| self.tensor()).collect()
    }
}

struct Decoded {
    hash: u64,
    params: Vec<Tensor>,
    optimizers: Vec<OptimizerState>,
    step: u64,
}

fn decode(bytes: &[u8]) -> Result<Decoded, NetError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(NetError::Format("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(NetError::Format(format!("unsupported version {version}")));
    }
    let hash = r.u64()?;
    let params = r.tensors()?;
    let count = r.u32()? as usize;
    if count > bytes.len() {
        return Err(NetError::Format("optimizer count exceeds file".into()));
    }
    let mut optimizers = Vec::with_capacity(count);
    for _ in 0..count {
        optimizers.push(match r.u8()? {
            0 => OptimizerState::Sgd,
            1 => {
                let t = r.u64()?;
                let m = r.tensors()?;
                let v = r.tensors()?;
                OptimizerState::Adam { t, m, v }
            }
            other => return Err(NetError::Format(format!("unknown optimizer tag {other}"))),
        });
    }
    let step = r.u64()?;
    if r.pos != bytes.len() {
        return Err(NetError::Format(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Ok(Decoded {
        hash,
        params,
        optimizers,
        step,
    })
}

fn shapes_match(expected: &[&Tensor], found: &[Tensor]) -> bool {
    expected.len() == found.len() && expected.iter().zip(found).all(|(a, b)| a.shape == b.shape)
}

/// Restores a network from checkpoint bytes. The network is left untouched
/// on any error.
pub fn restore(net: &mut PolicyNetwork, bytes: &[u8]) -> Result<(), NetError> {
    let decoded = decode(bytes)?;
    let params = net.params();
    if !shapes_match(&params, &decoded.params) {
        let want: Vec<_> = params.iter().map(|t| t.shape.clone()).collect();
        let got: Vec<_> = decoded.params.iter().map(|t| t.shape.clone()).collect();
        return Err(NetError::ShapeMismatch(format!(
            "network tensors {want:?}, checkpoint tensors {got:?}"
        )));
    }
    if decoded.hash != config_hash(net) {
        return Err(NetError::ShapeMismatch(
            "checkpoint was written by a different configuration".into(),
        ));
    }
    if decoded.optimizers.len() != net.optimizers().len() {
        return Err(NetError::ShapeMismatch("optimizer count differs".into()));
    }
    for (current, (loaded, net_params)) in net
        .optimizers()
        .iter()
        .zip(decoded.optimizers.iter().zip(net.nets()))
    {
        let ok = match (current, loaded) {
            (OptimizerState::Sgd, OptimizerState::Sgd) => true,
            (OptimizerState::Adam { .. }, OptimizerState::Adam { m, v, .. }) => {
                let p: Vec<&Tensor> = net_params.params().iter().collect();
                shapes_match(&p, m) && shapes_match(&p, v)
            }
            _ => false,
        };
        if !ok {
            return Err(NetError::ShapeMismatch("optimizer state differs".into()));
        }
    }
    net.restore(decoded.params, decoded.optimizers, decoded.step);
    Ok(())
}

impl PolicyNetwork {
    /// Writes parameters, optimizer state and step counter to `path`.
    pub fn save_model(&self, path: impl AsRef<Path>) -> Result<(), NetError> {
        fs::write(path, encode(self))?;
        Ok(())
    }

    /// Restores parameters, optimizer state and step counter from `path`.
    pub fn load_model(&mut self, path: impl AsRef<Path>) -> Result<(), NetError> {
        let bytes = fs::read(path)?;
        restore(self, &bytes)
    }
}
