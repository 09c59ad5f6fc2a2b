//! FTX: a minimal little-endian tensor container for exchanging encoder
//! features with external models.
//!
//! A file is a sequence of records, one per encoder level in encoder order
//! (finest first). Each record is self-describing:
//!
//! | bytes        | field                                  |
//! |--------------|----------------------------------------|
//! | 4            | magic `FTX1`                           |
//! | 4 (u32)      | version, currently 1                   |
//! | 4 (u32)      | dtype tag, 1 = f32                     |
//! | 4 (u32)      | rank `r`                               |
//! | 8·r (u64)    | dimensions, outermost first            |
//! | 4·∏dims      | f32 payload, row-major over the dims   |
//!
//! Feature maps are written as rank-3 `C x H x W` records. Readers also accept
//! rank 4 with a leading batch dimension of 1.

use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::tensor::FeatureMap;

pub const MAGIC: [u8; 4] = *b"FTX1";
pub const VERSION: u32 = 1;
pub const DTYPE_F32: u32 = 1;
/// Upper bound on rank accepted by the reader.
pub const MAX_RANK: u32 = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct FtxRecord {
    dims: Vec<u64>,
    data: Vec<f32>,
}

impl FtxRecord {
    pub fn new(dims: Vec<u64>, data: Vec<f32>) -> Result<Self> {
        if dims.is_empty() || dims.len() > MAX_RANK as usize {
            return invalid(format!("rank must be in 1..={MAX_RANK}, got {}", dims.len()));
        }
        if dims.contains(&0) {
            return invalid(format!("dimensions must be non-zero, got {dims:?}"));
        }
        let count = element_count(&dims).ok_or_else(|| Error::InvalidInput("dimension product overflows".into()))?;
        if count != data.len() as u64 {
            return invalid(format!("dims {dims:?} need {count} values, got {}", data.len()));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> &[u64] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn from_feature_map(fm: &FeatureMap) -> Self {
        Self {
            dims: vec![fm.channels() as u64, fm.height() as u64, fm.width() as u64],
            data: fm.data().iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn to_feature_map(&self) -> Result<FeatureMap> {
        let chw = match self.dims.as_slice() {
            [c, h, w] | [1, c, h, w] => [*c, *h, *w],
            other => return invalid(format!("expected a C x H x W record, got dims {other:?}")),
        };
        let [c, h, w] = chw.map(|d| d as usize);
        FeatureMap::new(c, h, w, self.data.iter().map(|&v| v as f64).collect())
    }

    fn encoded_len(&self) -> usize {
        16 + 8 * self.dims.len() + 4 * self.data.len()
    }
}

fn element_count(dims: &[u64]) -> Option<u64> {
    dims.iter().try_fold(1u64, |acc, &d| acc.checked_mul(d))
}

pub fn encode_records(records: &[FtxRecord]) -> Vec<u8> {
    let mut out = Vec::with_capacity(records.iter().map(FtxRecord::encoded_len).sum());
    for r in records {
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&DTYPE_F32.to_le_bytes());
        out.extend_from_slice(&(r.dims.len() as u32).to_le_bytes());
        for d in &r.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &r.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn write_records<W: Write>(mut w: W, records: &[FtxRecord]) -> std::io::Result<()> {
    w.write_all(&encode_records(records))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn fail<T>(&self, offset: usize, reason: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            offset: offset as u64,
            reason: reason.into(),
        })
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => self.fail(
                self.pos,
                format!("truncated {what}: need {n} bytes, {} left", self.bytes.len() - self.pos),
            ),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

/// Parses every record in `bytes`. Errors name the byte offset of the problem.
pub fn decode_records(bytes: &[u8]) -> Result<Vec<FtxRecord>> {
    let mut cur = Cursor { bytes, pos: 0 };
    if bytes.is_empty() {
        return cur.fail(0, "empty file: no records");
    }
    let mut records = Vec::new();
    while cur.pos < bytes.len() {
        let start = cur.pos;
        if cur.take(4, "magic")? != MAGIC {
            return cur.fail(start, "bad magic, expected FTX1");
        }
        let at = cur.pos;
        let version = cur.u32("version")?;
        if version != VERSION {
            return cur.fail(at, format!("unsupported version {version}"));
        }
        let at = cur.pos;
        let dtype = cur.u32("dtype")?;
        if dtype != DTYPE_F32 {
            return cur.fail(at, format!("unsupported dtype tag {dtype}"));
        }
        let at = cur.pos;
        let rank = cur.u32("rank")?;
        if rank == 0 || rank > MAX_RANK {
            return cur.fail(at, format!("rank {rank} outside 1..={MAX_RANK}"));
        }
        let mut dims = Vec::with_capacity(rank as usize);
        for _ in 0..rank {
            let at = cur.pos;
            let d = cur.u64("dimension")?;
            if d == 0 {
                return cur.fail(at, "zero-sized dimension");
            }
            dims.push(d);
        }
        let at = cur.pos;
        let byte_len = element_count(&dims)
            .and_then(|n| n.checked_mul(4))
            .and_then(|n| usize::try_from(n).ok());
        let Some(byte_len) = byte_len else {
            return cur.fail(at, "payload size overflows");
        };
        let payload = cur.take(byte_len, "payload")?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        records.push(FtxRecord { dims, data });
    }
    Ok(records)
}
