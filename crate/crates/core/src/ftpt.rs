//! FTPT binary tensor files.
//!
//! Layout (little-endian): magic `FTPT`, u8 version (1), u8 dtype (0 = f32),
//! u8 rank, one zero padding byte, `rank` u32 dims, then the row-major payload.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"FTPT";
pub const VERSION: u8 = 1;
pub const DTYPE_F32: u8 = 0;

pub fn encode(t: &Tensor<f32>) -> Result<Vec<u8>> {
    let rank = u8::try_from(t.rank())
        .map_err(|_| Error::Format(format!("rank {} exceeds 255", t.rank())))?;
    let mut out = Vec::with_capacity(8 + 4 * t.rank() + 4 * t.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[VERSION, DTYPE_F32, rank, 0]);
    for &d in t.dims() {
        let d = u32::try_from(d).map_err(|_| Error::Format(format!("dim {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    out.extend_from_slice(&t.payload_bytes());
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Tensor<f32>> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing FTPT magic".into()));
    }
    let (version, dtype, rank) = (bytes[4], bytes[5], bytes[6] as usize);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported FTPT version {version}")));
    }
    if dtype != DTYPE_F32 {
        return Err(Error::Format(format!("unsupported FTPT dtype {dtype}")));
    }
    let header = 8 + 4 * rank;
    if bytes.len() < header {
        return Err(Error::Format("truncated FTPT header".into()));
    }
    let dims: Vec<usize> = bytes[8..header]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let n: usize = dims.iter().product();
    let payload = &bytes[header..];
    if payload.len() != 4 * n {
        return Err(Error::Format(format!(
            "FTPT payload has {} bytes, dims {dims:?} need {}",
            payload.len(),
            4 * n
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Tensor::new(dims, data)
}

pub fn write(path: &Path, t: &Tensor<f32>) -> Result<()> {
    fs::write(path, encode(t)?)?;
    Ok(())
}

pub fn read(path: &Path) -> Result<Tensor<f32>> {
    decode(&fs::read(path)?)
}
