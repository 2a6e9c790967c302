//! Binary model checkpoints.
//!
//! Layout (all integers little-endian):
//! magic `AURC` · format version u32 · pipeline hash u64 · feature hash
//! u64 · model tag (u32 length + UTF-8) · stream tag (same) · tensor
//! count u32 · per tensor: name, rank u32, dims u64 each, f32 values.
//!
//! A checkpoint stores parameter *values* only. The architecture is
//! rebuilt from the run configuration (whose digest the pipeline hash
//! pins), so loading is an exact name-and-shape match against a freshly
//! built model.

use std::path::Path;

use auris_core::error::{Error, Result};
use auris_core::nn::{ParamStore, Tensor};

const MAGIC: &[u8; 4] = b"AURC";
const VERSION: u32 = 1;

/// A checkpoint read back from disk.
#[derive(Debug)]
pub struct Checkpoint {
    pub model_tag: String,
    pub stream_tag: String,
    pub pipeline_hash: u64,
    pub features_hash: u64,
    pub tensors: Vec<(String, Tensor<f32>)>,
}

fn push_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

/// Writes every tensor of `store` (values only) plus the identifying tags.
pub fn save_checkpoint(
    path: impl AsRef<Path>,
    model_tag: &str,
    stream_tag: &str,
    pipeline_hash: u64,
    features_hash: u64,
    store: &ParamStore<f32>,
) -> Result<()> {
    let named = store.named_tensors();
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&pipeline_hash.to_le_bytes());
    buf.extend_from_slice(&features_hash.to_le_bytes());
    push_str(&mut buf, model_tag);
    push_str(&mut buf, stream_tag);
    buf.extend_from_slice(&(named.len() as u32).to_le_bytes());
    for (name, tensor) in named {
        push_str(&mut buf, name);
        buf.extend_from_slice(&(tensor.shape().len() as u32).to_le_bytes());
        for &d in tensor.shape() {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in tensor.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, buf)?;
    Ok(())
}

/// Sequential reader with ingest-grade error messages.
struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.bytes.len() {
            return Err(Error::Ingest {
                path: self.path.to_path_buf(),
                reason: format!(
                    "truncated checkpoint: wanted {n} bytes at offset {}, file has {}",
                    self.at,
                    self.bytes.len()
                ),
            });
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| Error::Ingest {
            path: self.path.to_path_buf(),
            reason: "checkpoint holds a non-UTF-8 name".into(),
        })
    }
}

/// Reads a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let mut r = Reader { bytes: &bytes, at: 0, path };
    if r.take(4)? != MAGIC {
        return Err(Error::Ingest {
            path: path.to_path_buf(),
            reason: "bad magic; not a checkpoint file".into(),
        });
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Ingest {
            path: path.to_path_buf(),
            reason: format!("checkpoint format v{version}, this build reads v{VERSION}"),
        });
    }
    let pipeline_hash = r.u64()?;
    let features_hash = r.u64()?;
    let model_tag = r.string()?;
    let stream_tag = r.string()?;
    let count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name = r.string()?;
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u64()? as usize);
        }
        let numel: usize = shape.iter().product();
        let raw = r.take(numel * 4)?;
        let data: Vec<f32> =
            raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        tensors.push((name, Tensor::from_vec(&shape, data)?));
    }
    if r.at != bytes.len() {
        return Err(Error::Ingest {
            path: path.to_path_buf(),
            reason: format!("{} trailing bytes after the last tensor", bytes.len() - r.at),
        });
    }
    Ok(Checkpoint { model_tag, stream_tag, pipeline_hash, features_hash, tensors })
}
