//! Feature caches and patch assembly.
//!
//! Extraction renders each clip through the three front-ends and stores
//! one tensor file per (clip, stream) under a directory named by the
//! feature hash, so changing any front-end setting naturally invalidates
//! the cache. Assembly loads cached tensors, cuts them into patches and
//! stacks them into the batch tensors the training loops consume, keeping
//! a per-clip index so clip-level scores can be aggregated later.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::{Path, PathBuf};

use auris_core::dataset::{load_clip, resample, AudioClip, ManifestRecord};
use auris_core::dsp::{
    cqt, gamma_spec, gammatone_bank, log_mel, mel_filterbank, split_patches, stft, CqtConfig,
    FilterBank, GammatoneConfig, Spectrogram, TransformKind,
};
use auris_core::dsp::{load_tensor, save_tensor};
use auris_core::error::{Error, Result};
use auris_core::nn::Tensor;
use auris_core::training::{EncoderDataset, STREAM_NAMES};

use crate::config::RunConfig;

/// Cache directory: `AURIS_CACHE_DIR` when set, else `corpus_dir/cache`.
pub fn cache_root(cfg: &RunConfig) -> PathBuf {
    std::env::var_os("AURIS_CACHE_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| cfg.corpus_dir.join("cache"))
}

/// The cache file for one clip and stream.
pub fn cache_file(root: &Path, features_hash: u64, stem: &str, stream: &str) -> PathBuf {
    root.join(format!("{features_hash:016x}")).join(format!("{stem}.{stream}.aurf"))
}

/// A clip's identifier: its file stem.
pub fn clip_stem(record: &ManifestRecord) -> Result<String> {
    record
        .path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .ok_or_else(|| Error::Config(format!("clip path {:?} has no file name", record.path)))
}

/// The transform each stream name denotes.
pub fn stream_kind(stream: &str) -> Result<TransformKind> {
    match stream {
        "log-mel" => Ok(TransformKind::LogMel),
        "gammatone" => Ok(TransformKind::Gamma),
        "constant-q" => Ok(TransformKind::Cqt),
        other => Err(Error::Config(format!(
            "unknown stream `{other}` (expected one of {})",
            STREAM_NAMES.join(", ")
        ))),
    }
}

/// Filter banks shared across all clips of an extraction run.
pub struct Banks {
    mel: FilterBank,
    gamma: FilterBank,
}

impl Banks {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        Ok(Banks {
            mel: mel_filterbank(cfg.mels, cfg.f_min, cfg.f_max, cfg.n_fft, cfg.sample_rate)?,
            gamma: gammatone_bank(
                &GammatoneConfig::new(cfg.gamma_filters, cfg.f_min, cfg.f_max),
                cfg.n_fft,
                cfg.sample_rate,
            )?,
        })
    }
}

/// Loads a clip and brings it to the configured rate.
pub fn load_audio(cfg: &RunConfig, path: &Path) -> Result<AudioClip> {
    let clip = load_clip(path)?;
    if clip.sample_rate() == cfg.sample_rate {
        Ok(clip)
    } else {
        resample(&clip, cfg.sample_rate)
    }
}

/// Runs one front-end on a clip.
pub fn front_end(
    cfg: &RunConfig,
    banks: &Banks,
    clip: &AudioClip,
    stream: &str,
) -> Result<Spectrogram> {
    match stream {
        "log-mel" => log_mel(&stft(clip, cfg.window, cfg.hop, cfg.n_fft)?, &banks.mel),
        "gammatone" => gamma_spec(&stft(clip, cfg.window, cfg.hop, cfg.n_fft)?, &banks.gamma),
        "constant-q" => cqt(
            clip,
            &CqtConfig::new(cfg.cqt_bins_per_octave, cfg.cqt_f_min, cfg.cqt_bins, cfg.hop),
        ),
        other => Err(Error::Config(format!("unknown stream `{other}`"))),
    }
}

/// Outcome of ensuring one cache file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheState {
    /// Usable file already present.
    Cached,
    /// Computed this run (missing or unreadable before).
    Extracted,
}

/// Makes sure the cache file for (clip, stream) exists and is readable,
/// recomputing it when absent or corrupt.
pub fn ensure_cache(
    cfg: &RunConfig,
    banks: &Banks,
    clip: &AudioClip,
    path: &Path,
    stream: &str,
) -> Result<CacheState> {
    if path.exists() {
        match load_tensor(path) {
            Ok(_) => {
                log::info!("cache hit: {}", path.display());
                return Ok(CacheState::Cached);
            }
            Err(e) => log::warn!("re-extracting {}: {e}", path.display()),
        }
    }
    let gram = front_end(cfg, banks, clip, stream)?;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    save_tensor(path, gram.values())?;
    Ok(CacheState::Extracted)
}

/// Loads the cached tensor for (record, stream); a missing file is an
/// input error telling the user to extract first.
pub fn load_stream(
    cfg: &RunConfig,
    root: &Path,
    record: &ManifestRecord,
    stream: &str,
) -> Result<Tensor<f32>> {
    let path = cache_file(root, cfg.features_hash(), &clip_stem(record)?, stream);
    if !path.exists() {
        return Err(Error::Input(format!(
            "feature cache {} is missing; run `auris extract` with this config first",
            path.display()
        )));
    }
    load_tensor(&path)
}

/// Keeps the first `keep` frames of an F×T matrix.
fn trim_frames(values: &Tensor<f32>, keep: usize) -> Result<Tensor<f32>> {
    let (f, t) = (values.shape()[0], values.shape()[1]);
    if keep == t {
        return Ok(values.clone());
    }
    let mut out = Vec::with_capacity(f * keep);
    for row in 0..f {
        out.extend_from_slice(&values.data()[row * t..row * t + keep]);
    }
    Tensor::from_vec(&[f, keep], out)
}

/// Cuts one cached matrix into model-ready patches.
fn patchify(cfg: &RunConfig, values: Tensor<f32>, kind: TransformKind) -> Result<Vec<Tensor<f32>>> {
    let f = values.shape()[0];
    // The cache stores the matrix only; patching never reads the axis, so
    // a row-index axis stands in for the real center frequencies.
    let axis: Vec<f64> = (0..f).map(|i| i as f64).collect();
    let gram = Spectrogram::new(values, axis, cfg.hop, kind)?;
    let set = split_patches(&gram, cfg.patch_width, cfg.overlap()?)?;
    Ok(set.patches().to_vec())
}

/// One clip inside an assembled batch: identity, truth, metadata, and
/// which batch rows its patches occupy.
#[derive(Debug, Clone)]
pub struct ClipRef {
    pub id: String,
    pub truth: usize,
    pub meta: BTreeMap<String, String>,
    pub patches: Range<usize>,
}

fn truth_index(labels: &[String], record: &ManifestRecord) -> Result<usize> {
    labels.iter().position(|l| *l == record.label).ok_or_else(|| {
        Error::Config(format!("label `{}` does not appear in the label set", record.label))
    })
}

fn stack(patches: &[Tensor<f32>]) -> Result<Tensor<f32>> {
    if patches.is_empty() {
        return Err(Error::Input("no patches to assemble; is the record list empty?".into()));
    }
    let (f, w) = (patches[0].shape()[0], patches[0].shape()[1]);
    let mut x = Tensor::zeros(&[patches.len(), f, w, 1]);
    for (i, p) in patches.iter().enumerate() {
        x.item_mut(i).copy_from_slice(p.data());
    }
    Ok(x)
}

fn one_hot(refs: &[ClipRef], total: usize, classes: usize) -> Tensor<f32> {
    let mut y = Tensor::zeros(&[total, classes]);
    for r in refs {
        for row in r.patches.clone() {
            y.data_mut()[row * classes + r.truth] = 1.0;
        }
    }
    y
}

/// Assembles the configured single stream for the given records into
/// (inputs, one-hot labels, per-clip index).
pub fn assemble_single(
    cfg: &RunConfig,
    root: &Path,
    records: &[ManifestRecord],
    indices: &[usize],
    labels: &[String],
) -> Result<(Tensor<f32>, Tensor<f32>, Vec<ClipRef>)> {
    let kind = stream_kind(&cfg.stream)?;
    let mut patches = Vec::new();
    let mut refs = Vec::with_capacity(indices.len());
    for &i in indices {
        let record = &records[i];
        let values = load_stream(cfg, root, record, &cfg.stream)?;
        let clip_patches = patchify(cfg, values, kind)?;
        let start = patches.len();
        patches.extend(clip_patches);
        refs.push(ClipRef {
            id: clip_stem(record)?,
            truth: truth_index(labels, record)?,
            meta: record.meta.clone(),
            patches: start..patches.len(),
        });
    }
    let x = stack(&patches)?;
    let y = one_hot(&refs, patches.len(), labels.len());
    Ok((x, y, refs))
}

/// Assembles all three streams, frame-aligned per clip, into an encoder
/// dataset plus the per-clip index. Streams are truncated to the shortest
/// frame count of the three so every stream yields the same patch grid.
pub fn assemble_encoder(
    cfg: &RunConfig,
    root: &Path,
    records: &[ManifestRecord],
    indices: &[usize],
    labels: &[String],
) -> Result<(EncoderDataset, Vec<ClipRef>)> {
    let mut per_stream: [Vec<Tensor<f32>>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut refs = Vec::with_capacity(indices.len());
    let mut total = 0usize;
    for &i in indices {
        let record = &records[i];
        let values: Vec<Tensor<f32>> = STREAM_NAMES
            .iter()
            .map(|s| load_stream(cfg, root, record, s))
            .collect::<Result<_>>()?;
        let frames = values.iter().map(|v| v.shape()[1]).min().expect("three streams");
        let mut count = None;
        for (slot, (value, name)) in per_stream.iter_mut().zip(values.into_iter().zip(STREAM_NAMES))
        {
            let trimmed = trim_frames(&value, frames)?;
            let patches = patchify(cfg, trimmed, stream_kind(name)?)?;
            match count {
                None => count = Some(patches.len()),
                Some(c) => debug_assert_eq!(c, patches.len(), "aligned streams patch equally"),
            }
            slot.extend(patches);
        }
        let n = count.unwrap_or(0);
        refs.push(ClipRef {
            id: clip_stem(record)?,
            truth: truth_index(labels, record)?,
            meta: record.meta.clone(),
            patches: total..total + n,
        });
        total += n;
    }
    let [lm, ga, cq] = per_stream;
    let y = one_hot(&refs, total, labels.len());
    let data = EncoderDataset::new(Some(stack(&lm)?), Some(stack(&ga)?), Some(stack(&cq)?), y)?;
    Ok((data, refs))
}

/// Copies a contiguous row range of a batch tensor.
pub fn rows(t: &Tensor<f32>, range: Range<usize>) -> Tensor<f32> {
    let mut shape = t.shape().to_vec();
    shape[0] = range.len();
    let mut out = Tensor::zeros(&shape);
    for (o, i) in range.enumerate() {
        out.item_mut(o).copy_from_slice(t.item(i));
    }
    out
}
