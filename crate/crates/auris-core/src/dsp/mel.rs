//! Mel frequency warping, triangular filter banks, and log-mel spectrograms.

use crate::dsp::types::{banked_log_spec, BankKind, FilterBank, Spectrogram, TransformKind};
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Warps a frequency in Hz onto the mel scale: `2595·log10(1 + f/700)`.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

/// Inverse of [`hz_to_mel`].
pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Builds a triangular mel filter bank for an `n_fft`-point spectrum.
///
/// `n_mels + 2` boundary points are spaced evenly on the mel axis between
/// `f_min` and `f_max`; filter i rises linearly (in Hz) from boundary i to
/// boundary i+1 and falls to boundary i+2, evaluated at the STFT bin
/// frequencies `k·rate/n_fft`. A filter too narrow to cover any bin is a
/// configuration error — every band must hear something.
pub fn mel_filterbank(
    n_mels: usize,
    f_min: f64,
    f_max: f64,
    n_fft: usize,
    sample_rate: u32,
) -> Result<FilterBank> {
    if n_mels == 0 {
        return Err(Error::Config("mel bank needs at least one filter".into()));
    }
    let nyquist = sample_rate as f64 / 2.0;
    if !(0.0 <= f_min && f_min < f_max && f_max <= nyquist) {
        return Err(Error::Config(format!(
            "band edges must satisfy 0 <= f_min < f_max <= {nyquist} Hz, got [{f_min}, {f_max}]"
        )));
    }
    if n_fft < 2 {
        return Err(Error::Config("FFT size must be at least two samples".into()));
    }

    let (mel_lo, mel_hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
    let step = (mel_hi - mel_lo) / (n_mels + 1) as f64;
    let edges_hz: Vec<f64> =
        (0..n_mels + 2).map(|i| mel_to_hz(mel_lo + i as f64 * step)).collect();

    let bins = n_fft / 2 + 1;
    let bin_hz = sample_rate as f64 / n_fft as f64;
    let mut weights = vec![0.0f32; n_mels * bins];
    for m in 0..n_mels {
        let (left, center, right) = (edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]);
        for k in 0..bins {
            let f = k as f64 * bin_hz;
            let w = if f > left && f <= center {
                (f - left) / (center - left)
            } else if f > center && f < right {
                (right - f) / (right - center)
            } else {
                0.0
            };
            weights[m * bins + k] = w as f32;
        }
    }

    let centers = edges_hz[1..=n_mels].to_vec();
    FilterBank::from_weights(Tensor::from_vec(&[n_mels, bins], weights)?, centers, BankKind::Mel)
}

/// Log-compressed mel spectrogram: `log10(max(bank × stft, 1e-10))`.
pub fn log_mel(spec: &Spectrogram, bank: &FilterBank) -> Result<Spectrogram> {
    if spec.kind() != TransformKind::Stft {
        return Err(Error::Input(format!(
            "mel weighting expects a magnitude STFT, got {}",
            spec.kind().tag()
        )));
    }
    if bank.kind() != BankKind::Mel {
        return Err(Error::Input("log_mel expects a mel filter bank".into()));
    }
    banked_log_spec(bank, spec, TransformKind::LogMel)
}
