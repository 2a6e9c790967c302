//! Binary on-disk cache for feature tensors.
//!
//! Layout, all little-endian: magic `AURF`, u32 rank, u32 dims[rank],
//! then the elements as 32-bit floats in row-major order.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Tensor;

const MAGIC: &[u8; 4] = b"AURF";
const MAX_RANK: u32 = 8;

/// Writes a tensor to `path` in the cache format.
pub fn save_tensor(path: impl AsRef<Path>, tensor: &Tensor<f32>) -> Result<()> {
    let mut buf =
        Vec::with_capacity(8 + tensor.shape().len() * 4 + tensor.numel() * 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(tensor.shape().len() as u32).to_le_bytes());
    for &d in tensor.shape() {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in tensor.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

fn bad(path: &Path, reason: impl Into<String>) -> Error {
    Error::Ingest { path: path.to_path_buf(), reason: reason.into() }
}

/// Reads a tensor back from the cache format, validating the header and
/// that the payload holds exactly the advertised number of elements.
pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor<f32>> {
    let path = path.as_ref();
    let mut file = std::fs::File::open(path)?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;

    if bytes.len() < 8 {
        return Err(bad(path, "file too short for a cache header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad(path, "bad magic; not a feature cache file"));
    }
    let rank = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if rank == 0 || rank > MAX_RANK {
        return Err(bad(path, format!("implausible tensor rank {rank}")));
    }
    let header = 8 + rank as usize * 4;
    if bytes.len() < header {
        return Err(bad(path, "file truncated inside the dimension list"));
    }
    let mut dims = Vec::with_capacity(rank as usize);
    let mut numel = 1usize;
    for i in 0..rank as usize {
        let d = u32::from_le_bytes(bytes[8 + i * 4..12 + i * 4].try_into().unwrap()) as usize;
        if d == 0 {
            return Err(bad(path, "zero-sized dimension"));
        }
        numel = numel
            .checked_mul(d)
            .ok_or_else(|| bad(path, "dimension product overflows"))?;
        dims.push(d);
    }
    if bytes.len() != header + numel * 4 {
        return Err(bad(
            path,
            format!("payload holds {} bytes, header promises {}", bytes.len() - header, numel * 4),
        ));
    }
    let data: Vec<f32> = bytes[header..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(bad(path, "payload contains non-finite values"));
    }
    Ok(Tensor::from_vec(&dims, data)?)
}
