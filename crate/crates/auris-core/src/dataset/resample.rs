//! Sample-rate conversion by windowed-sinc interpolation.
//!
//! Each output sample is a Kaiser-windowed sinc interpolation of the input,
//! with the kernel widened by the decimation factor when downsampling so the
//! passband stays below the output Nyquist frequency. Tap sums are
//! normalized per output sample, which keeps DC levels exact everywhere,
//! including clip edges.

use crate::dataset::clip::AudioClip;
use crate::error::{Error, Result};

/// Kaiser window shape parameter (≈90 dB stopband).
const KAISER_BETA: f64 = 8.6;
/// Sinc taps on each side of the output position, before widening.
const HALF_TAPS: usize = 32;
/// Passband edge as a fraction of the narrower Nyquist frequency.
const ROLLOFF: f64 = 0.945;

/// Zeroth-order modified Bessel function of the first kind, by its power
/// series (converges quickly for the arguments a Kaiser window produces).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..64 {
        term *= (half / m as f64) * (half / m as f64);
        sum += term;
        if term < 1e-14 * sum {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
    }
}

/// Converts `clip` to `target_hz`. The output holds
/// `round(len · target / source)` samples; equal rates return the clip
/// unchanged, sample-exact.
pub fn resample(clip: &AudioClip, target_hz: u32) -> Result<AudioClip> {
    if target_hz == 0 {
        return Err(Error::Range("resample target rate must be positive".into()));
    }
    let source_hz = clip.sample_rate();
    if target_hz == source_hz {
        return Ok(clip.clone());
    }
    let ratio = target_hz as f64 / source_hz as f64;
    let out_len = ((clip.len() as f64 * ratio).round() as usize).max(1);

    // Width in input samples: stretch the kernel when decimating.
    let stretch = (1.0 / ratio).max(1.0);
    let half_width = HALF_TAPS as f64 * stretch;
    // Cutoff in cycles per input sample: half the narrower bandwidth.
    let cutoff = 0.5 * ROLLOFF / stretch;

    let input = clip.samples();
    let i0_beta = bessel_i0(KAISER_BETA);
    let mut out = Vec::with_capacity(out_len);
    for j in 0..out_len {
        let center = j as f64 / ratio;
        let lo = ((center - half_width).ceil() as isize).max(0) as usize;
        let hi = ((center + half_width).floor() as isize).min(input.len() as isize - 1) as usize;
        let mut acc = 0.0f64;
        let mut tap_sum = 0.0f64;
        for (i, &x) in input.iter().enumerate().take(hi + 1).skip(lo) {
            let offset = i as f64 - center;
            let frac = offset / half_width;
            let window = bessel_i0(KAISER_BETA * (1.0 - frac * frac).max(0.0).sqrt()) / i0_beta;
            let tap = sinc(2.0 * cutoff * offset) * window;
            acc += x as f64 * tap;
            tap_sum += tap;
        }
        out.push((acc / tap_sum).clamp(-1.0, 1.0) as f32);
    }
    AudioClip::new(out, target_hz)
}
