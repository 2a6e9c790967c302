//! Model checkpoint container.
//!
//! Binary layout (all integers little-endian):
//!
//! ```text
//! magic   5 bytes  "AURM1"
//! u32     descriptor length in bytes
//! bytes   UTF-8 architecture descriptor (one layer per line, plus
//!         key=value header lines such as the feature-config fingerprint)
//! u32     tensor count
//! per tensor:
//!   u32   name length, then UTF-8 name
//!   u32   rank
//!   u32×r dims
//!   f32×n payload, row-major
//! ```
//!
//! Values are stored in `f32` regardless of the in-memory element type;
//! training runs in `f32`, so round trips are bit-exact where it matters.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

const MAGIC: &[u8; 5] = b"AURM1";

fn ingest_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Ingest { path: path.to_path_buf(), reason: reason.into() }
}

/// Writes a checkpoint: a text architecture descriptor plus named tensors.
pub fn save(path: &Path, descriptor: &str, tensors: &[(&str, &Tensor<f32>)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    let desc = descriptor.as_bytes();
    w.write_all(&(desc.len() as u32).to_le_bytes())?;
    w.write_all(desc)?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, tensor) in tensors {
        let name_bytes = name.as_bytes();
        w.write_all(&(name_bytes.len() as u32).to_le_bytes())?;
        w.write_all(name_bytes)?;
        w.write_all(&(tensor.shape().len() as u32).to_le_bytes())?;
        for &d in tensor.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for &v in tensor.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32(r: &mut impl Read, path: &Path, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|_| ingest_err(path, format!("truncated at {what}")))?;
    Ok(u32::from_le_bytes(buf))
}

/// Reads a checkpoint back as `(descriptor, named tensors)`.
pub fn load(path: &Path) -> Result<(String, Vec<(String, Tensor<f32>)>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic).map_err(|_| ingest_err(path, "file shorter than magic"))?;
    if &magic != MAGIC {
        return Err(ingest_err(path, format!("bad checkpoint magic {magic:?}")));
    }
    let desc_len = read_u32(&mut r, path, "descriptor length")? as usize;
    let mut desc = vec![0u8; desc_len];
    r.read_exact(&mut desc).map_err(|_| ingest_err(path, "truncated descriptor"))?;
    let descriptor = String::from_utf8(desc)
        .map_err(|_| ingest_err(path, "descriptor is not valid UTF-8"))?;
    let count = read_u32(&mut r, path, "tensor count")? as usize;
    let mut tensors = Vec::with_capacity(count);
    for i in 0..count {
        let name_len = read_u32(&mut r, path, "tensor name length")? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name).map_err(|_| ingest_err(path, format!("tensor {i} name")))?;
        let name = String::from_utf8(name)
            .map_err(|_| ingest_err(path, format!("tensor {i} name is not UTF-8")))?;
        let rank = read_u32(&mut r, path, "tensor rank")? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(read_u32(&mut r, path, "tensor dims")? as usize);
        }
        let numel: usize = dims.iter().product();
        let mut payload = vec![0u8; numel * 4];
        r.read_exact(&mut payload)
            .map_err(|_| ingest_err(path, format!("tensor `{name}` payload truncated")))?;
        let data: Vec<f32> = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        tensors.push((name, Tensor::from_vec(&dims, data)?));
    }
    Ok((descriptor, tensors))
}
