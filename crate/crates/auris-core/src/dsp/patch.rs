//! Splitting spectrograms into fixed-width time patches.

use crate::dsp::types::Spectrogram;
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Patch overlap along time: either none (stride = width) or half a patch
/// (stride = width/2, width must be even).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PatchOverlap {
    #[default]
    None,
    Half,
}

impl PatchOverlap {
    /// Overlap as a fraction of the patch width.
    pub fn fraction(self) -> f64 {
        match self {
            PatchOverlap::None => 0.0,
            PatchOverlap::Half => 0.5,
        }
    }

    fn stride(self, width: usize) -> Result<usize> {
        match self {
            PatchOverlap::None => Ok(width),
            PatchOverlap::Half if width % 2 == 0 => Ok(width / 2),
            PatchOverlap::Half => {
                Err(Error::Config(format!("half overlap needs an even patch width, got {width}")))
            }
        }
    }
}

/// A spectrogram cut into equal F×W tiles.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    patches: Vec<Tensor<f32>>,
    width: usize,
    overlap: PatchOverlap,
    source_shape: (usize, usize),
}

impl PatchSet {
    pub fn patches(&self) -> &[Tensor<f32>] {
        &self.patches
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn overlap(&self) -> PatchOverlap {
        self.overlap
    }

    /// (F, T) of the spectrogram the patches were cut from.
    pub fn source_shape(&self) -> (usize, usize) {
        self.source_shape
    }

    pub fn into_patches(self) -> Vec<Tensor<f32>> {
        self.patches
    }
}

/// Cuts a spectrogram into F×W patches on a fixed stride.
///
/// With T ≥ W the patch count is `floor((T − W)/stride) + 1` and any
/// trailing frames that do not fill a patch are dropped. A spectrogram
/// shorter than one patch is tiled along time (`column t of the patch is
/// source column t mod T`), yielding exactly one patch.
pub fn split_patches(spec: &Spectrogram, width: usize, overlap: PatchOverlap) -> Result<PatchSet> {
    if width == 0 {
        return Err(Error::Config("patch width must be at least one frame".into()));
    }
    let stride = overlap.stride(width)?;
    let (f, t) = (spec.rows(), spec.frames());
    let src = spec.values().data();

    let mut patches = Vec::new();
    if t < width {
        let mut data = vec![0.0f32; f * width];
        for row in 0..f {
            for col in 0..width {
                data[row * width + col] = src[row * t + col % t];
            }
        }
        patches.push(Tensor::from_vec(&[f, width], data)?);
    } else {
        let count = (t - width) / stride + 1;
        for p in 0..count {
            let start = p * stride;
            let mut data = vec![0.0f32; f * width];
            for row in 0..f {
                let line = &src[row * t + start..row * t + start + width];
                data[row * width..(row + 1) * width].copy_from_slice(line);
            }
            patches.push(Tensor::from_vec(&[f, width], data)?);
        }
    }
    Ok(PatchSet { patches, width, overlap, source_shape: (f, t) })
}
