//! Mono audio clips and sample-level editing: channel reduction, cycle
//! extraction by annotated times, and minimum-duration tiling.

use crate::error::{Error, Result};

/// A mono audio signal with its sample rate. Samples are finite amplitudes
/// in [−1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f32>,
    sample_rate: u32,
}

/// How a two-channel recording is reduced to mono.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChannelSelect {
    /// First channel only (the default reduction).
    #[default]
    First,
    /// Second channel only.
    Second,
    /// Per-frame mean (L + R) / 2.
    Average,
    /// Per-frame difference (L − R) / 2.
    Side,
}

impl AudioClip {
    /// Wraps validated samples: non-empty, finite, within [−1, 1], and a
    /// positive sample rate.
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Input("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::Input("clip must contain at least one sample".into()));
        }
        if let Some(bad) = samples.iter().find(|v| !v.is_finite() || v.abs() > 1.0) {
            return Err(Error::Input(format!("clip sample {bad} outside [-1, 1]")));
        }
        Ok(AudioClip { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Clips are never empty, but the conventional pairing with `len` keeps
    /// call sites honest.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }
}

/// Reduces interleaved frames to mono. `channels` is the channel count of
/// the source; `select` other than [`ChannelSelect::First`] requires two
/// channels.
pub fn reduce_channels(
    interleaved: &[f32],
    channels: u16,
    select: ChannelSelect,
) -> Result<Vec<f32>> {
    match (channels, select) {
        (1, ChannelSelect::First) => Ok(interleaved.to_vec()),
        (1, other) => Err(Error::Input(format!(
            "channel reduction {other:?} needs a two-channel recording"
        ))),
        (2, select) => {
            let frames = interleaved.len() / 2;
            let mut out = Vec::with_capacity(frames);
            for i in 0..frames {
                let (l, r) = (interleaved[2 * i], interleaved[2 * i + 1]);
                out.push(match select {
                    ChannelSelect::First => l,
                    ChannelSelect::Second => r,
                    ChannelSelect::Average => (l + r) / 2.0,
                    ChannelSelect::Side => (l - r) / 2.0,
                });
            }
            Ok(out)
        }
        (n, _) => Err(Error::Input(format!("unsupported channel count {n}"))),
    }
}

/// Cuts the annotated span [onset, offset) out of a clip, in seconds.
/// Boundaries are rounded to the nearest sample, so adjacent extractions
/// concatenate without gaps or overlaps.
pub fn extract_cycle(clip: &AudioClip, onset_s: f64, offset_s: f64) -> Result<AudioClip> {
    if !(onset_s >= 0.0 && offset_s > onset_s) {
        return Err(Error::Range(format!(
            "cycle bounds must satisfy 0 ≤ onset < offset, got {onset_s}..{offset_s}"
        )));
    }
    let rate = clip.sample_rate() as f64;
    let start = (onset_s * rate).round() as usize;
    let end = (offset_s * rate).round() as usize;
    if end > clip.len() || start >= end {
        return Err(Error::Range(format!(
            "cycle {onset_s}..{offset_s} s exceeds the {:.3} s clip",
            clip.duration_s()
        )));
    }
    AudioClip::new(clip.samples()[start..end].to_vec(), clip.sample_rate())
}

/// Returns the clip unchanged when it already lasts `min_s`; otherwise
/// tiles whole copies of it (never a partial repetition) until the duration
/// reaches `min_s`.
pub fn enforce_min_duration(clip: &AudioClip, min_s: f64) -> Result<AudioClip> {
    if !(min_s > 0.0) {
        return Err(Error::Range(format!("minimum duration {min_s} s must be positive")));
    }
    if clip.duration_s() >= min_s {
        return Ok(clip.clone());
    }
    let target = min_s * clip.sample_rate() as f64;
    let reps = (target / clip.len() as f64).ceil() as usize;
    let mut samples = Vec::with_capacity(reps * clip.len());
    for _ in 0..reps {
        samples.extend_from_slice(clip.samples());
    }
    AudioClip::new(samples, clip.sample_rate())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize, rate: u32) -> AudioClip {
        AudioClip::new((0..n).map(|i| (i % 100) as f32 / 100.0).collect(), rate).unwrap()
    }

    #[test]
    fn new_rejects_out_of_range_and_empty() {
        assert!(AudioClip::new(vec![], 16000).is_err());
        assert!(AudioClip::new(vec![1.5], 16000).is_err());
        assert!(AudioClip::new(vec![f32::NAN], 16000).is_err());
        assert!(AudioClip::new(vec![0.0], 0).is_err());
        assert!(AudioClip::new(vec![1.0, -1.0], 8000).is_ok());
    }

    #[test]
    fn channel_reduction_matches_de_interleaving_by_hand() {
        let frames = [0.1f32, -0.3, 0.5, 0.7, -0.2, 0.4];
        assert_eq!(reduce_channels(&frames, 2, ChannelSelect::First).unwrap(), [0.1, 0.5, -0.2]);
        assert_eq!(reduce_channels(&frames, 2, ChannelSelect::Second).unwrap(), [-0.3, 0.7, 0.4]);
        let avg = reduce_channels(&frames, 2, ChannelSelect::Average).unwrap();
        let side = reduce_channels(&frames, 2, ChannelSelect::Side).unwrap();
        for i in 0..3 {
            assert!((avg[i] - (frames[2 * i] + frames[2 * i + 1]) / 2.0).abs() < 1e-7);
            assert!((side[i] - (frames[2 * i] - frames[2 * i + 1]) / 2.0).abs() < 1e-7);
        }
    }

    #[test]
    fn mono_only_allows_first_channel() {
        let mono = [0.1f32, 0.2];
        assert!(reduce_channels(&mono, 1, ChannelSelect::First).is_ok());
        assert!(reduce_channels(&mono, 1, ChannelSelect::Average).is_err());
        assert!(reduce_channels(&mono, 1, ChannelSelect::Side).is_err());
    }

    #[test]
    fn extract_whole_clip_is_identity() {
        let clip = ramp(16000, 16000);
        let cut = extract_cycle(&clip, 0.0, 1.0).unwrap();
        assert_eq!(cut.samples(), clip.samples());
    }

    #[test]
    fn one_second_cut_is_exactly_one_rate_of_samples() {
        let clip = ramp(3 * 16000, 16000);
        let cut = extract_cycle(&clip, 1.0, 2.0).unwrap();
        assert_eq!(cut.len(), 16000);
        assert_eq!(cut.samples(), &clip.samples()[16000..32000]);
    }

    #[test]
    fn adjacent_cycles_concatenate_back_to_the_source_span() {
        let clip = ramp(24000, 8000);
        let spans = [(0.0, 0.7), (0.7, 1.9), (1.9, 3.0)];
        let mut joined = Vec::new();
        for (a, b) in spans {
            joined.extend_from_slice(extract_cycle(&clip, a, b).unwrap().samples());
        }
        assert_eq!(joined.as_slice(), clip.samples());
    }

    #[test]
    fn extract_rejects_bad_bounds() {
        let clip = ramp(8000, 8000);
        assert!(extract_cycle(&clip, -0.1, 0.5).is_err());
        assert!(extract_cycle(&clip, 0.5, 0.5).is_err());
        assert!(extract_cycle(&clip, 0.5, 1.5).is_err());
    }

    #[test]
    fn min_duration_keeps_long_and_boundary_clips_unchanged() {
        let six = ramp(6 * 8000, 8000);
        assert_eq!(enforce_min_duration(&six, 5.0).unwrap().samples(), six.samples());
        let five = ramp(5 * 8000, 8000);
        assert_eq!(enforce_min_duration(&five, 5.0).unwrap().samples(), five.samples());
    }

    #[test]
    fn two_second_clip_tiles_to_three_repetitions_for_five_seconds() {
        let clip = ramp(2 * 8000, 8000);
        let out = enforce_min_duration(&clip, 5.0).unwrap();
        assert_eq!(out.len(), 3 * clip.len());
        for rep in 0..3 {
            assert_eq!(&out.samples()[rep * clip.len()..(rep + 1) * clip.len()], clip.samples());
        }
    }

    #[test]
    fn tiled_length_is_the_smallest_whole_multiple_reaching_the_target() {
        // 0.9 s at 1 kHz, minimum 2.05 s → ceil(2050/900) = 3 repetitions.
        let clip = ramp(900, 1000);
        let out = enforce_min_duration(&clip, 2.05).unwrap();
        assert_eq!(out.len(), 2700);
    }
}
