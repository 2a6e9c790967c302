//! Constant-Q transform on a uniform frame grid.

use rustfft::num_complex::Complex;

use crate::dataset::AudioClip;
use crate::dsp::types::{Spectrogram, TransformKind};
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Constant-Q parameters. Bin k is centered at `f_min·2^(k/bins_per_octave)`
/// and analysed over `N(k) = round(Q·rate/F_k)` samples, where the quality
/// factor `Q = 1/(2^(1/b) − 1)` is derived, never stored. All bins share
/// one uniform `hop`, so the output sits on a rectangular time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CqtConfig {
    pub bins_per_octave: u32,
    pub f_min: f64,
    pub n_bins: usize,
    /// Generalized-Hamming window shape; 0.54 is the Hamming value.
    pub alpha: f64,
    pub hop: usize,
}

impl CqtConfig {
    pub fn new(bins_per_octave: u32, f_min: f64, n_bins: usize, hop: usize) -> Self {
        CqtConfig { bins_per_octave, f_min, n_bins, alpha: 0.54, hop }
    }

    /// Quality factor shared by every bin: `1/(2^(1/b) − 1)`.
    pub fn q(&self) -> f64 {
        1.0 / ((1.0 / self.bins_per_octave as f64).exp2() - 1.0)
    }

    /// Center frequency of bin k.
    pub fn bin_freq(&self, k: usize) -> f64 {
        self.f_min * (k as f64 / self.bins_per_octave as f64).exp2()
    }
}

/// Computes the constant-Q magnitude spectrogram of a clip.
///
/// Frame t of bin k analyses samples `[t·hop, t·hop + N(k))` with the
/// window `w[n] = α + (1−α)·cos(2πn/(N(k)−1))` and the kernel
/// `e^(−i2πnQ/N(k))`, averaged over the window length:
/// `X[k,t] = |Σ_n s[t·hop+n]·w[n]·e^(−i2πnQ/N(k))| / N(k)`.
/// The frame count is set by the longest window (bin 0), so every bin has
/// data for every frame.
pub fn cqt(clip: &AudioClip, cfg: &CqtConfig) -> Result<Spectrogram> {
    if cfg.bins_per_octave == 0 {
        return Err(Error::Config("bins per octave must be at least one".into()));
    }
    if !(cfg.f_min > 0.0) {
        return Err(Error::Config("lowest bin frequency must be positive".into()));
    }
    if cfg.n_bins == 0 {
        return Err(Error::Config("need at least one frequency bin".into()));
    }
    if cfg.hop == 0 {
        return Err(Error::Config("hop must be at least one sample".into()));
    }
    if !(cfg.alpha.is_finite() && (0.0..=1.0).contains(&cfg.alpha)) {
        return Err(Error::Config(format!("window shape must lie in [0, 1], got {}", cfg.alpha)));
    }
    let rate = clip.sample_rate() as f64;
    let top = cfg.bin_freq(cfg.n_bins - 1);
    if top >= rate / 2.0 {
        return Err(Error::Config(format!(
            "top bin at {top:.1} Hz reaches the Nyquist frequency {} Hz",
            rate / 2.0
        )));
    }

    let q = cfg.q();
    let lengths: Vec<usize> =
        (0..cfg.n_bins).map(|k| ((q * rate / cfg.bin_freq(k)).round() as usize).max(2)).collect();
    let longest = lengths[0];
    let samples = clip.samples();
    if samples.len() < longest {
        return Err(Error::Input(format!(
            "clip of {} samples is shorter than the longest analysis window ({longest})",
            samples.len()
        )));
    }
    let frames = (samples.len() - longest) / cfg.hop + 1;

    // Per-bin windowed kernel, precomputed once.
    let tau = std::f64::consts::TAU;
    let kernels: Vec<Vec<Complex<f64>>> = lengths
        .iter()
        .map(|&n| {
            (0..n)
                .map(|i| {
                    let w = cfg.alpha + (1.0 - cfg.alpha) * (tau * i as f64 / (n - 1) as f64).cos();
                    w * Complex::new(0.0, -tau * i as f64 * q / n as f64).exp()
                })
                .collect()
        })
        .collect();

    let mut values = vec![0.0f32; cfg.n_bins * frames];
    for (k, kernel) in kernels.iter().enumerate() {
        let row = &mut values[k * frames..(k + 1) * frames];
        for (t, slot) in row.iter_mut().enumerate() {
            let start = t * cfg.hop;
            let mut acc = Complex::new(0.0f64, 0.0);
            for (coeff, &s) in kernel.iter().zip(&samples[start..start + kernel.len()]) {
                acc += coeff * s as f64;
            }
            *slot = (acc.norm() / kernel.len() as f64) as f32;
        }
    }

    let freq_axis = (0..cfg.n_bins).map(|k| cfg.bin_freq(k)).collect();
    Spectrogram::new(
        Tensor::from_vec(&[cfg.n_bins, frames], values)?,
        freq_axis,
        cfg.hop,
        TransformKind::Cqt,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quality_factor_is_constant_across_the_geometric_axis() {
        for b in [12u32, 24, 48] {
            let cfg = CqtConfig::new(b, 55.0, 3 * b as usize, 256);
            let q = cfg.q();
            for k in 0..cfg.n_bins - 1 {
                let (f0, f1) = (cfg.bin_freq(k), cfg.bin_freq(k + 1));
                assert!(
                    (f0 / (f1 - f0) - q).abs() < 1e-9,
                    "b={b}, k={k}: ratio {} vs Q {q}",
                    f0 / (f1 - f0)
                );
            }
        }
    }

    #[test]
    fn twelve_bins_per_octave_gives_the_semitone_quality_factor() {
        // 1/(2^(1/12) − 1), evaluated independently.
        let cfg = CqtConfig::new(12, 220.0, 12, 256);
        assert!((cfg.q() - 16.817153745105756).abs() < 1e-9);
    }

    #[test]
    fn a_semitone_grid_sine_dominates_its_own_bin() {
        let cfg = CqtConfig::new(12, 220.0, 12, 256);
        // Bin 5 of an A3-rooted semitone grid: 220·2^(5/12) ≈ 293.66 Hz.
        let freq = cfg.bin_freq(5);
        let rate = 16000u32;
        let w = std::f64::consts::TAU * freq / rate as f64;
        let clip = AudioClip::new(
            (0..8192).map(|n| 0.8 * (w * n as f64).sin() as f32).collect(),
            rate,
        )
        .unwrap();
        let spec = cqt(&clip, &cfg).unwrap();
        assert_eq!(spec.rows(), 12);
        assert_eq!(spec.kind(), TransformKind::Cqt);
        for t in 0..spec.frames() {
            for k in 0..12 {
                if k == 5 {
                    continue;
                }
                assert!(
                    spec.at(5, t) > spec.at(k, t),
                    "frame {t}: bin {k} ({}) outweighs the sine bin",
                    spec.at(k, t)
                );
            }
        }
    }

    #[test]
    fn frame_grid_follows_the_longest_window() {
        let cfg = CqtConfig::new(12, 220.0, 12, 256);
        let clip = AudioClip::new(vec![0.25; 8192], 16000).unwrap();
        let spec = cqt(&clip, &cfg).unwrap();
        let longest = (cfg.q() * 16000.0 / 220.0).round() as usize;
        assert_eq!(spec.frames(), (8192 - longest) / 256 + 1);
        assert_eq!(spec.frame_hop(), 256);
        assert!((spec.freq_axis()[11] - 220.0 * (11.0 / 12.0f64).exp2()).abs() < 1e-9);
    }

    #[test]
    fn nyquist_violations_and_bad_shapes_are_configuration_errors() {
        let clip = AudioClip::new(vec![0.1; 4096], 16000).unwrap();
        // 220·2^(65/12) > 8000.
        assert!(cqt(&clip, &CqtConfig::new(12, 220.0, 66, 256)).unwrap_err().is_config());
        assert!(cqt(&clip, &CqtConfig::new(0, 220.0, 12, 256)).unwrap_err().is_config());
        assert!(cqt(&clip, &CqtConfig::new(12, -5.0, 12, 256)).unwrap_err().is_config());
        assert!(cqt(&clip, &CqtConfig::new(12, 220.0, 12, 0)).unwrap_err().is_config());
        let bad_alpha = CqtConfig { alpha: 1.5, ..CqtConfig::new(12, 220.0, 12, 256) };
        assert!(cqt(&clip, &bad_alpha).unwrap_err().is_config());
    }

    #[test]
    fn short_clips_are_input_errors() {
        // The A3 window at 16 kHz spans ~1223 samples.
        let clip = AudioClip::new(vec![0.1; 1000], 16000).unwrap();
        assert!(matches!(cqt(&clip, &CqtConfig::new(12, 220.0, 12, 256)), Err(Error::Input(_))));
    }

    #[test]
    fn matches_direct_evaluation_of_the_bin_formula() {
        let cfg = CqtConfig::new(12, 440.0, 6, 128);
        let rate = 16000u32;
        let mut state = 0x2545_f491_4f6c_dd1du64;
        let samples: Vec<f32> = (0..4096)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 11) as f32 / (1u64 << 53) as f32 - 0.5
            })
            .collect();
        let clip = AudioClip::new(samples, rate).unwrap();
        let spec = cqt(&clip, &cfg).unwrap();

        // Independent route: re-evaluate one bin per frame with plain loops.
        let q = cfg.q();
        for k in [0usize, 3, 5] {
            let n = ((q * rate as f64 / cfg.bin_freq(k)).round() as usize).max(2);
            for t in [0usize, 7] {
                let (mut re, mut im) = (0.0f64, 0.0f64);
                for i in 0..n {
                    let w = 0.54
                        + 0.46 * (std::f64::consts::TAU * i as f64 / (n - 1) as f64).cos();
                    let arg = -std::f64::consts::TAU * i as f64 * q / n as f64;
                    let s = clip.samples()[t * cfg.hop + i] as f64 * w;
                    re += s * arg.cos();
                    im += s * arg.sin();
                }
                let want = re.hypot(im) / n as f64;
                let got = spec.at(k, t) as f64;
                assert!((got - want).abs() < 1e-7, "bin {k} frame {t}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        let clip = AudioClip::new(
            (0..6000).map(|n| 0.3 * (n as f32 * 0.01).sin()).collect(),
            16000,
        )
        .unwrap();
        let cfg = CqtConfig::new(24, 220.0, 24, 256);
        let a = cqt(&clip, &cfg).unwrap();
        let b = cqt(&clip, &cfg).unwrap();
        assert_eq!(a.values().data(), b.values().data());
    }
}
