//! Binary checkpoint encoding.
//!
//! Layout: magic `AVAE`, `u32` format version, `u32` record count, then per
//! record a `u8` kind tag, `u32` rank, `rank` × `u32` extents and the
//! little-endian `f64` payload. All integers are little-endian.

use super::{Tensor, TensorError};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"AVAE";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum RecordKind {
    DenseWeight = 0,
    DenseBias = 1,
    ConvKernel = 2,
    ConvBias = 3,
    ConvTransposeKernel = 4,
    ConvTransposeBias = 5,
}

impl RecordKind {
    fn from_tag(tag: u8) -> Option<Self> {
        use RecordKind::*;
        Some(match tag {
            0 => DenseWeight,
            1 => DenseBias,
            2 => ConvKernel,
            3 => ConvBias,
            4 => ConvTransposeKernel,
            5 => ConvTransposeBias,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointRecord {
    pub kind: RecordKind,
    pub tensor: Tensor,
}

pub fn encode_checkpoint(records: &[CheckpointRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for r in records {
        out.push(r.kind as u8);
        out.extend_from_slice(&(r.tensor.shape().len() as u32).to_le_bytes());
        for &e in r.tensor.shape() {
            out.extend_from_slice(&(e as u32).to_le_bytes());
        }
        for v in r.tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], TensorError> {
        if self.bytes.len() - self.pos < n {
            return Err(TensorError::Checkpoint {
                offset: self.pos,
                reason: format!("truncated {what}"),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, TensorError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Vec<CheckpointRecord>, TensorError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != CHECKPOINT_MAGIC {
        return Err(TensorError::Checkpoint {
            offset: 0,
            reason: "bad magic".into(),
        });
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(TensorError::Checkpoint {
            offset: 4,
            reason: format!("unsupported version {version}"),
        });
    }
    let count = r.u32("record count")? as usize;
    let mut records = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let tag_offset = r.pos;
        let tag = r.take(1, "kind tag")?[0];
        let kind = RecordKind::from_tag(tag).ok_or_else(|| TensorError::Checkpoint {
            offset: tag_offset,
            reason: format!("unknown kind tag {tag}"),
        })?;
        let rank = r.u32("rank")? as usize;
        let shape_offset = r.pos;
        let shape = (0..rank).map(|_| r.u32("extent").map(|e| e as usize)).collect::<Result<Vec<_>, _>>()?;
        if shape.is_empty() || shape.contains(&0) {
            return Err(TensorError::Checkpoint {
                offset: shape_offset,
                reason: format!("invalid shape {shape:?}"),
            });
        }
        let len: usize = shape.iter().product();
        let payload = r.take(len * 8, "payload")?;
        let data = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        records.push(CheckpointRecord {
            kind,
            tensor: Tensor::new(shape, data).expect("shape validated"),
        });
    }
    if r.pos != bytes.len() {
        return Err(TensorError::Checkpoint {
            offset: r.pos,
            reason: "trailing bytes".into(),
        });
    }
    Ok(records)
}
