//! Raw feature tensor dump: ASCII magic `FTEN`, then channels, height and
//! width as little-endian `u32`, then `f32` values channel-major, row-major.

use super::FeatureTensor;
use crate::error::{Error, Result};

pub const FTEN_MAGIC: &[u8; 4] = b"FTEN";

const HEADER_LEN: usize = 16;

pub fn read_ften(bytes: &[u8]) -> Result<FeatureTensor> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    if &bytes[0..4] != FTEN_MAGIC {
        return Err(Error::parse(0, "bad magic, expected FTEN"));
    }
    let dim = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (channels, height, width) = (dim(4), dim(8), dim(12));
    let expected = channels
        .checked_mul(height)
        .and_then(|n| n.checked_mul(width))
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::parse(4, "tensor dimensions overflow"))?;
    if bytes.len() != expected {
        return Err(Error::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    FeatureTensor::from_vec(channels, height, width, values)
}

/// Values are narrowed to `f32`.
pub fn write_ften(tensor: &FeatureTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + tensor.values().len() * 4);
    out.extend_from_slice(FTEN_MAGIC);
    for d in [tensor.channels(), tensor.height(), tensor.width()] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in tensor.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}
