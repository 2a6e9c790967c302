//! Early classification: scoring a clip from growing prefixes.
//!
//! For each requested duration the clip's patch grid is filtered to the
//! patches that lie entirely inside the elapsed audio — a patch is
//! admissible once the last sample of its last analysis frame has been
//! heard — and the standard classify-and-average pipeline runs on that
//! subset. The full clip duration therefore reproduces the standard
//! evaluation exactly.

use crate::dsp::{split_patches, PatchOverlap, Spectrogram};
use crate::error::{Error, Result};
use crate::eval::aggregate::aggregate_patches;
use crate::nn::{Chain, ParamStore, Shape, Tensor};

/// One point of an early-classification curve.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyPoint {
    /// Elapsed audio in seconds.
    pub duration: f64,
    /// Clip-level probabilities using only the patches heard so far.
    pub probs: Vec<f32>,
}

/// Relative slack absorbing floating-point error in seconds→samples
/// conversions; far below one sample at any realistic rate and duration.
const TIME_SLACK: f64 = 1e-9;

/// Classifies a clip at several elapsed durations.
///
/// `window_len` is the analysis window of the front-end that produced
/// `gram` (in samples), `clip_samples` the underlying clip's length.
/// Durations longer than the clip are a range error; durations too short
/// to cover even one patch are skipped with a log notice.
#[allow(clippy::too_many_arguments)]
pub fn early_curve(
    chain: &Chain<f32>,
    store: &ParamStore<f32>,
    gram: &Spectrogram,
    patch_width: usize,
    overlap: PatchOverlap,
    window_len: usize,
    sample_rate: u32,
    clip_samples: usize,
    durations: &[f64],
) -> Result<Vec<EarlyPoint>> {
    if sample_rate == 0 {
        return Err(Error::Config("sample rate must be positive".into()));
    }
    if window_len == 0 {
        return Err(Error::Config("window length must be positive".into()));
    }
    let patches = split_patches(gram, patch_width, overlap)?;
    let freq = gram.rows();
    let want = Shape::Map { freq, time: patch_width, channels: 1 };
    if chain.input_shape() != want {
        return Err(Error::Shape(format!(
            "network consumes {:?}, patches are {want:?}",
            chain.input_shape()
        )));
    }
    let stride = match overlap {
        PatchOverlap::None => patch_width,
        PatchOverlap::Half => patch_width / 2,
    };
    let hop = gram.frame_hop();
    // Samples heard once patch p is complete: the last sample of the last
    // frame the patch covers. A clip shorter than one patch tiles into a
    // single patch whose extent is the whole spectrogram.
    let extent = |p: usize| -> f64 {
        let last_frame = if gram.frames() < patch_width {
            gram.frames() - 1
        } else {
            p * stride + patch_width - 1
        };
        (last_frame * hop + window_len) as f64
    };

    // Classify every patch once; duration filtering then just picks
    // prefixes of this table.
    let mut probs_per_patch: Vec<Vec<f32>> = Vec::with_capacity(patches.len());
    const CHUNK: usize = 128;
    let mut start = 0usize;
    while start < patches.len() {
        let end = (start + CHUNK).min(patches.len());
        let mut batch = Tensor::zeros(&[end - start, freq, patch_width, 1]);
        for (o, patch) in patches.patches()[start..end].iter().enumerate() {
            batch.item_mut(o).copy_from_slice(patch.data());
        }
        let out = chain.forward_infer(store, &batch)?;
        for o in 0..end - start {
            probs_per_patch.push(out.item(o).to_vec());
        }
        start = end;
    }

    let mut curve = Vec::new();
    for &d in durations {
        if !d.is_finite() || d <= 0.0 {
            return Err(Error::Range(format!("duration {d}s is not positive")));
        }
        let budget = d * sample_rate as f64;
        if budget > clip_samples as f64 * (1.0 + TIME_SLACK) {
            return Err(Error::Range(format!(
                "duration {d}s exceeds the clip ({clip_samples} samples at {sample_rate} Hz)"
            )));
        }
        let admissible = (0..patches.len())
            .take_while(|&p| extent(p) <= budget + extent(p) * TIME_SLACK)
            .count();
        if admissible == 0 {
            log::warn!("duration {d}s is shorter than one patch; skipped");
            continue;
        }
        curve.push(EarlyPoint {
            duration: d,
            probs: aggregate_patches(&probs_per_patch[..admissible])?,
        });
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::TransformKind;
    use crate::nn::{Initializer, LayerSpec};

    const RATE: u32 = 8192;
    const HOP: usize = 256;
    const WINDOW: usize = 1024;

    fn gram(frames: usize) -> Spectrogram {
        let data: Vec<f32> = (0..3 * frames).map(|i| (i as f32 * 0.37).sin() * 0.5 + 0.5).collect();
        Spectrogram::new(
            Tensor::from_vec(&[3, frames], data).unwrap(),
            vec![100.0, 200.0, 300.0],
            HOP,
            TransformKind::LogMel,
        )
        .unwrap()
    }

    fn classifier() -> (Chain<f32>, ParamStore<f32>) {
        let mut store = ParamStore::new();
        let mut init = Initializer::new(64);
        let chain = Chain::build(
            "e",
            Shape::Map { freq: 3, time: 4, channels: 1 },
            &[
                LayerSpec::Conv { kernel: (3, 3), out_channels: 3 },
                LayerSpec::Relu,
                LayerSpec::GlobalAvgPool,
                LayerSpec::Dense { width: 2 },
                LayerSpec::Softmax,
            ],
            &mut store,
            &mut init,
        )
        .unwrap();
        (chain, store)
    }

    fn direct_probs(chain: &Chain<f32>, store: &ParamStore<f32>, patch: &Tensor<f32>) -> Vec<f32> {
        let one = Tensor::from_vec(&[1, 3, 4, 1], patch.data().to_vec()).unwrap();
        chain.forward_infer(store, &one).unwrap().item(0).to_vec()
    }

    #[test]
    fn the_full_duration_reproduces_the_standard_pipeline_exactly() {
        let g = gram(12);
        let (chain, store) = classifier();
        let clip = (12 - 1) * HOP + WINDOW; // 3840 samples
        let full = clip as f64 / RATE as f64;
        let curve = early_curve(
            &chain, &store, &g, 4, PatchOverlap::None, WINDOW, RATE, clip, &[full],
        )
        .unwrap();
        assert_eq!(curve.len(), 1);

        let patches = split_patches(&g, 4, PatchOverlap::None).unwrap();
        assert_eq!(patches.len(), 3);
        let rows: Vec<Vec<f32>> = patches
            .patches()
            .iter()
            .map(|p| direct_probs(&chain, &store, p))
            .collect();
        assert_eq!(curve[0].probs, aggregate_patches(&rows).unwrap());
    }

    #[test]
    fn a_one_patch_budget_equals_that_patch_alone() {
        let g = gram(12);
        let (chain, store) = classifier();
        let clip = (12 - 1) * HOP + WINDOW;
        // Exactly the samples of the first patch: frames 0..4.
        let t1 = ((4 - 1) * HOP + WINDOW) as f64 / RATE as f64;
        let curve = early_curve(
            &chain, &store, &g, 4, PatchOverlap::None, WINDOW, RATE, clip, &[t1],
        )
        .unwrap();
        assert_eq!(curve.len(), 1);
        let patches = split_patches(&g, 4, PatchOverlap::None).unwrap();
        assert_eq!(curve[0].probs, direct_probs(&chain, &store, &patches.patches()[0]));
    }

    #[test]
    fn prefixes_grow_and_too_short_durations_are_skipped() {
        let g = gram(12);
        let (chain, store) = classifier();
        let clip = (12 - 1) * HOP + WINDOW;
        let t = |frames: usize| ((frames - 1) * HOP + WINDOW) as f64 / RATE as f64;
        let curve = early_curve(
            &chain, &store, &g, 4, PatchOverlap::None, WINDOW, RATE, clip,
            &[0.05, t(4), t(8), t(12)],
        )
        .unwrap();
        // 0.05 s is shorter than one patch and disappears.
        assert_eq!(curve.len(), 3);
        assert_eq!(curve[0].duration, t(4));
        assert!(curve.iter().all(|p| {
            let sum: f32 = p.probs.iter().sum();
            (sum - 1.0).abs() < 1e-5
        }));
        // More audio changes the aggregate (the patches differ).
        assert_ne!(curve[0].probs, curve[2].probs);
    }

    #[test]
    fn durations_beyond_the_clip_are_rejected() {
        let g = gram(12);
        let (chain, store) = classifier();
        let clip = (12 - 1) * HOP + WINDOW;
        let err = early_curve(
            &chain, &store, &g, 4, PatchOverlap::None, WINDOW, RATE, clip, &[0.5],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Range(_)));
    }

    #[test]
    fn a_clip_shorter_than_one_patch_tiles_and_scores_at_its_own_length() {
        let g = gram(2);
        let (chain, store) = classifier();
        let clip = (2 - 1) * HOP + WINDOW; // 1280 samples
        let full = clip as f64 / RATE as f64;
        let curve = early_curve(
            &chain, &store, &g, 4, PatchOverlap::None, WINDOW, RATE, clip,
            &[0.1, full],
        )
        .unwrap();
        assert_eq!(curve.len(), 1, "only the full duration covers the tiled patch");
        assert_eq!(curve[0].duration, full);
    }
}
