//! Binary checkpoint container.
//!
//! Layout: 8-byte magic, `u32` format version, `u64` header length, a JSON
//! header, then every parameter slot followed by the Adam first and second
//! moments, all as little-endian scalars in slot order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::trainer::TrainingConfig;
use crate::error::{Error, Result};
use crate::network::RevisionNet;
use crate::optim::{Adam, AdamState};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"RVSNCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    /// Scalar type of the stored values, `"f32"` or `"f64"`.
    pub scalar: String,
    pub config: TrainingConfig,
    /// Optimizer steps completed.
    pub iteration: u64,
    pub seed: u64,
    pub sample_rng: ChaCha8Rng,
    pub rollout_rng: ChaCha8Rng,
    pub adam: AdamState,
    pub slot_lengths: Vec<usize>,
}

/// Everything needed to resume training or run inference.
#[derive(Debug, Clone)]
pub struct Checkpoint<T> {
    pub header: CheckpointHeader,
    pub net: RevisionNet<T>,
    pub adam: Adam<T>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn write(&self, path: &Path) -> Result<()> {
        let header = serde_json::to_vec(&self.header).map_err(|e| Error::Parse(e.to_string()))?;
        let mut bytes = Vec::with_capacity(20 + header.len());
        bytes.extend_from_slice(CHECKPOINT_MAGIC);
        bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        bytes.extend_from_slice(&(header.len() as u64).to_le_bytes());
        bytes.extend_from_slice(&header);
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        out.write_all(&bytes).map_err(|e| Error::io(path, e))?;
        let slots = self.net.slots();
        for group in [slots, self.adam.first_moment.iter().collect(), self.adam.second_moment.iter().collect()] {
            for slot in group {
                let mut buf = Vec::with_capacity(slot.len() * T::BYTES);
                for &v in slot.iter() {
                    v.write_le(&mut buf);
                }
                out.write_all(&buf).map_err(|e| Error::io(path, e))?;
            }
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut input = BufReader::new(file);
        let mismatch = |m: String| Error::CheckpointMismatch(format!("{}: {m}", path.display()));
        let mut fixed = [0u8; 20];
        input.read_exact(&mut fixed).map_err(|_| mismatch("truncated header".into()))?;
        if &fixed[..8] != CHECKPOINT_MAGIC {
            return Err(mismatch("not a checkpoint file".into()));
        }
        let version = u32::from_le_bytes(fixed[8..12].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(mismatch(format!("unsupported checkpoint version {version}")));
        }
        let header_len = u64::from_le_bytes(fixed[12..20].try_into().expect("8 bytes")) as usize;
        let mut header = vec![0u8; header_len];
        input.read_exact(&mut header).map_err(|_| mismatch("truncated header".into()))?;
        let header: CheckpointHeader =
            serde_json::from_slice(&header).map_err(|e| mismatch(format!("bad header: {e}")))?;
        if header.scalar != T::NAME {
            return Err(mismatch(format!("stored as {}, requested {}", header.scalar, T::NAME)));
        }

        let mut net = RevisionNet::<T>::new(header.config.network.clone(), 0)?;
        let expected: Vec<usize> = net.slots().iter().map(|s| s.len()).collect();
        if expected != header.slot_lengths {
            return Err(mismatch("parameter layout does not match the stored configuration".into()));
        }
        let mut read_slot = |len: usize| -> Result<Vec<T>> {
            let mut buf = vec![0u8; len * T::BYTES];
            input.read_exact(&mut buf).map_err(|_| mismatch("truncated parameters".into()))?;
            Ok(buf.chunks_exact(T::BYTES).map(T::read_le).collect())
        };
        for (slot, &len) in net.slots_mut().into_iter().zip(&expected) {
            *slot = read_slot(len)?;
        }
        let first_moment = expected.iter().map(|&n| read_slot(n)).collect::<Result<Vec<_>>>()?;
        let second_moment = expected.iter().map(|&n| read_slot(n)).collect::<Result<Vec<_>>>()?;
        let mut rest = [0u8; 1];
        if input.read(&mut rest).map_err(|e| Error::io(path, e))? != 0 {
            return Err(mismatch("trailing bytes after the parameters".into()));
        }
        let adam = Adam {
            beta1: header.adam.beta1,
            beta2: header.adam.beta2,
            eps: header.adam.eps,
            step: header.adam.step,
            first_moment,
            second_moment,
        };
        Ok(Self { header, net, adam })
    }
}

/// Loads only the network from a checkpoint.
pub fn load_model<T: Scalar>(path: &Path) -> Result<RevisionNet<T>> {
    Ok(Checkpoint::<T>::read(path)?.net)
}
