//! Short-time Fourier transform with a Hamming window.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::dataset::AudioClip;
use crate::dsp::types::{Spectrogram, TransformKind};
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Hamming window of length `n` (n ≥ 2): `0.54 − 0.46·cos(2πi/(n−1))`.
pub(crate) fn hamming(n: usize) -> Vec<f64> {
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| 0.54 - 0.46 * (std::f64::consts::TAU * i as f64 / denom).cos())
        .collect()
}

/// Computes the magnitude STFT of a clip.
///
/// Frame t covers samples `[t·hop, t·hop + window_len)`; each frame is
/// Hamming-windowed, zero-padded to `n_fft`, transformed, and reduced to
/// the magnitude of the first `n_fft/2 + 1` bins. The output matrix is
/// `(n_fft/2 + 1) × (floor((len − window_len)/hop) + 1)` with bin k
/// centered at `k·rate/n_fft` Hz. All arithmetic runs in f64; values are
/// stored as f32.
pub fn stft(clip: &AudioClip, window_len: usize, hop: usize, n_fft: usize) -> Result<Spectrogram> {
    if window_len < 2 {
        return Err(Error::Config("window must span at least two samples".into()));
    }
    if window_len > n_fft {
        return Err(Error::Config(format!(
            "window of {window_len} samples does not fit an FFT of {n_fft}"
        )));
    }
    if hop == 0 {
        return Err(Error::Config("hop must be at least one sample".into()));
    }
    let samples = clip.samples();
    if samples.len() < window_len {
        return Err(Error::Input(format!(
            "clip of {} samples is shorter than one window ({window_len})",
            samples.len()
        )));
    }

    let frames = (samples.len() - window_len) / hop + 1;
    let bins = n_fft / 2 + 1;
    let window = hamming(window_len);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut values = vec![0.0f32; bins * frames];
    for t in 0..frames {
        let start = t * hop;
        for (n, slot) in buf.iter_mut().enumerate() {
            *slot = if n < window_len {
                Complex::new(samples[start + n] as f64 * window[n], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (k, row) in values.chunks_exact_mut(frames).enumerate() {
            row[t] = buf[k].norm() as f32;
        }
    }

    let bin_hz = clip.sample_rate() as f64 / n_fft as f64;
    let freq_axis = (0..bins).map(|k| k as f64 * bin_hz).collect();
    Spectrogram::new(Tensor::from_vec(&[bins, frames], values)?, freq_axis, hop, TransformKind::Stft)
}
