//! Patch-to-clip aggregation and multi-stream fusion.
//!
//! Per-patch class probabilities are averaged into one clip-level vector,
//! several parallel streams (spectrogram kinds, channels, patch sizes) are
//! fused by grand mean or by summing per-stream aggregates, and a label is
//! read off by argmax. All accumulation runs in `f64` over `f32` inputs,
//! which keeps the means exact whenever the inputs coincide (a mean of
//! identical rows returns that row bit for bit).

use crate::error::{Error, Result};

/// Elementwise mean of per-patch probability rows.
pub fn aggregate_patches(patch_probs: &[Vec<f32>]) -> Result<Vec<f32>> {
    if patch_probs.is_empty() {
        return Err(Error::Input("cannot aggregate zero patches".into()));
    }
    let width = patch_probs[0].len();
    if width == 0 {
        return Err(Error::Input("probability rows must be non-empty".into()));
    }
    let mut sum = vec![0.0f64; width];
    for (i, row) in patch_probs.iter().enumerate() {
        if row.len() != width {
            return Err(Error::Shape(format!(
                "patch {i} has {} classes, patch 0 has {width}",
                row.len()
            )));
        }
        for (s, &v) in sum.iter_mut().zip(row.iter()) {
            *s += v as f64;
        }
    }
    let n = patch_probs.len() as f64;
    Ok(sum.into_iter().map(|s| (s / n) as f32).collect())
}

/// The class a probability row names: the argmax index, ties resolving to
/// the lowest class. An empty row maps to class 0.
pub fn predict_label(probs: &[f32]) -> usize {
    let mut best = 0usize;
    for (i, &v) in probs.iter().enumerate().skip(1) {
        if v > probs[best] {
            best = i;
        }
    }
    best
}

/// How [`fuse`] combines parallel streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FuseMode {
    /// Grand mean over every patch of every stream — a probability row.
    Mean,
    /// Sum of the per-stream aggregates — unnormalized, argmax-equivalent
    /// to the mean when all streams carry equally many patches.
    Sum,
}

/// Fuses `streams` — each a list of per-patch probability rows — into one
/// clip-level vector.
pub fn fuse(streams: &[Vec<Vec<f32>>], mode: FuseMode) -> Result<Vec<f32>> {
    if streams.is_empty() {
        return Err(Error::Input("cannot fuse zero streams".into()));
    }
    match mode {
        FuseMode::Mean => {
            let all: Vec<Vec<f32>> = streams.iter().flatten().cloned().collect();
            aggregate_patches(&all)
        }
        FuseMode::Sum => {
            let width = streams[0].first().map(Vec::len).unwrap_or(0);
            let mut sum = vec![0.0f64; width];
            for (m, stream) in streams.iter().enumerate() {
                let agg = aggregate_patches(stream).map_err(|e| match e {
                    Error::Input(msg) => Error::Input(format!("stream {m}: {msg}")),
                    other => other,
                })?;
                if agg.len() != width {
                    return Err(Error::Shape(format!(
                        "stream {m} has {} classes, stream 0 has {width}",
                        agg.len()
                    )));
                }
                for (s, v) in sum.iter_mut().zip(agg) {
                    *s += v as f64;
                }
            }
            Ok(sum.into_iter().map(|s| s as f32).collect())
        }
    }
}

/// Classification accuracy in percent: `100·correct/total`.
pub fn accuracy(correct: usize, total: usize) -> Result<f64> {
    if total == 0 {
        return Err(Error::Input("accuracy over zero samples is undefined".into()));
    }
    if correct > total {
        return Err(Error::Input(format!(
            "{correct} correct out of only {total} samples"
        )));
    }
    Ok(100.0 * correct as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_patches_aggregate_to_themselves_bitwise() {
        let row = vec![0.33f32, 0.11, 0.56];
        let agg = aggregate_patches(&vec![row.clone(); 7]).unwrap();
        assert_eq!(agg, row);
    }

    #[test]
    fn two_patch_mean_matches_arithmetic() {
        let agg =
            aggregate_patches(&[vec![0.6, 0.4], vec![0.2, 0.8]]).unwrap();
        assert_eq!(agg, vec![0.4, 0.6]);
    }

    #[test]
    fn a_single_patch_is_returned_unchanged() {
        let row = vec![0.25f32, 0.75];
        assert_eq!(aggregate_patches(&[row.clone()]).unwrap(), row);
        assert!(aggregate_patches(&[]).is_err());
    }

    #[test]
    fn argmax_picks_the_largest_and_breaks_ties_low() {
        assert_eq!(predict_label(&[0.1, 0.7, 0.2]), 1);
        assert_eq!(predict_label(&[0.5, 0.5]), 0);
        // Positive rescaling never moves the argmax.
        let row = [0.2f32, 0.5, 0.3];
        let scaled: Vec<f32> = row.iter().map(|v| v * 3.5).collect();
        assert_eq!(predict_label(&row), predict_label(&scaled));
    }

    #[test]
    fn fusing_copies_of_one_stream_keeps_its_aggregate_exactly() {
        let stream = vec![vec![0.6f32, 0.4], vec![0.1, 0.9], vec![0.3, 0.7]];
        let single = aggregate_patches(&stream).unwrap();
        for m in 1..=5 {
            let fused = fuse(&vec![stream.clone(); m], FuseMode::Mean).unwrap();
            assert_eq!(fused, single, "mean over {m} copies drifted");
        }
    }

    #[test]
    fn opposed_single_patch_streams_tie_toward_the_lowest_class() {
        let fused = fuse(
            &[vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]],
            FuseMode::Mean,
        )
        .unwrap();
        assert_eq!(fused, vec![0.5, 0.5]);
        assert_eq!(predict_label(&fused), 0);
    }

    #[test]
    fn accuracy_follows_the_ratio_and_rejects_bad_counts() {
        assert_eq!(accuracy(4, 4).unwrap(), 100.0);
        assert_eq!(accuracy(3, 4).unwrap(), 75.0);
        assert!(accuracy(0, 0).is_err());
        assert!(accuracy(5, 4).is_err());
    }

    /// Dyadic probability rows summing to 1, so every aggregation below is
    /// exact in both f32 and f64.
    fn dyadic_row(classes: usize, picks: &[usize]) -> Vec<f32> {
        let mut row = vec![0.0f32; classes];
        let share = 1.0 / picks.len() as f32;
        for &p in picks {
            row[p % classes] += share;
        }
        row
    }

    proptest! {
        #[test]
        fn aggregation_stays_on_the_probability_simplex(
            rows in prop::collection::vec(
                prop::collection::vec(0u32..64, 1..5),
                1..6,
            ),
            classes in 2usize..5,
        ) {
            let patches: Vec<Vec<f32>> = rows
                .iter()
                .map(|picks| {
                    let picks: Vec<usize> =
                        picks.iter().map(|&p| p as usize).collect();
                    dyadic_row(classes, &picks)
                })
                .collect();
            let agg = aggregate_patches(&patches).unwrap();
            prop_assert!(agg.iter().all(|&v| v >= 0.0));
            let sum: f64 = agg.iter().map(|&v| v as f64).sum();
            prop_assert!((sum - 1.0).abs() < 1e-6, "sum {sum}");
        }

        #[test]
        fn mean_and_sum_fusion_agree_on_the_argmax_for_equal_patch_counts(
            seeds in prop::collection::vec(
                prop::collection::vec(prop::collection::vec(0u32..64, 1..4), 1..4),
                1..4,
            ),
            classes in 2usize..5,
        ) {
            // Force equal patch counts by truncating to the shortest.
            let n = seeds.iter().map(Vec::len).min().unwrap();
            let streams: Vec<Vec<Vec<f32>>> = seeds
                .iter()
                .map(|stream| {
                    stream[..n]
                        .iter()
                        .map(|picks| {
                            let picks: Vec<usize> =
                                picks.iter().map(|&p| p as usize).collect();
                            dyadic_row(classes, &picks)
                        })
                        .collect()
                })
                .collect();
            let mean = fuse(&streams, FuseMode::Mean).unwrap();
            let sum = fuse(&streams, FuseMode::Sum).unwrap();
            prop_assert_eq!(predict_label(&mean), predict_label(&sum));
        }
    }
}
