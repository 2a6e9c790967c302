//! Gammatone filter bank realized as a frequency-domain weighting matrix.

use rustfft::num_complex::Complex;

use crate::dsp::types::{banked_log_spec, BankKind, FilterBank, Spectrogram, TransformKind};
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Equivalent rectangular bandwidth at center frequency `hz`:
/// `24.7·(4.37e-3·hz + 1)`.
pub fn erb(hz: f64) -> f64 {
    24.7 * (4.37e-3 * hz + 1.0)
}

/// Integrated ERB count below `hz` (the ERB-rate scale):
/// `(1000/(24.7·4.37))·ln(1 + 4.37e-3·hz)`.
pub fn erb_rate(hz: f64) -> f64 {
    (1000.0 / (24.7 * 4.37)) * (1.0 + 4.37e-3 * hz).ln()
}

/// Inverse of [`erb_rate`].
fn erb_rate_to_hz(rate: f64) -> f64 {
    ((rate / (1000.0 / (24.7 * 4.37))).exp() - 1.0) / 4.37e-3
}

/// Gammatone bank parameters. Centers are spaced evenly on the ERB-rate
/// scale from `f_min` to `f_max` inclusive; each filter's bandwidth is
/// `bandwidth_scale · erb(center)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammatoneConfig {
    pub n_filters: usize,
    pub f_min: f64,
    pub f_max: f64,
    /// Filter order P of the gammatone envelope.
    pub order: u32,
    /// Multiplier on the ERB at each center; 1.019 matches the classical
    /// fourth-order fit to cochlear data.
    pub bandwidth_scale: f64,
    /// Carrier phase of the impulse response.
    pub phase: f64,
}

impl GammatoneConfig {
    pub fn new(n_filters: usize, f_min: f64, f_max: f64) -> Self {
        GammatoneConfig { n_filters, f_min, f_max, order: 4, bandwidth_scale: 1.019, phase: 0.0 }
    }
}

/// Builds the gammatone weighting matrix for an `n_fft`-point spectrum.
///
/// Row i is the magnitude frequency response of the order-P gammatone at
/// center fc_i, sampled at the STFT bin frequencies and scaled to unit
/// peak. The analytic response of the causal gammatone
/// `t^{P−1}·e^{−2πb t}·cos(2πfc t + θ)` is
/// `((P−1)!/2)·[e^{iθ}(2πb + i2π(f−fc))^{−P} + e^{−iθ}(2πb + i2π(f+fc))^{−P}]`.
pub fn gammatone_bank(cfg: &GammatoneConfig, n_fft: usize, sample_rate: u32) -> Result<FilterBank> {
    if cfg.n_filters == 0 {
        return Err(Error::Config("gammatone bank needs at least one filter".into()));
    }
    if cfg.order == 0 {
        return Err(Error::Config("gammatone order must be at least one".into()));
    }
    if !(cfg.bandwidth_scale > 0.0) {
        return Err(Error::Config("gammatone bandwidth scale must be positive".into()));
    }
    let nyquist = sample_rate as f64 / 2.0;
    if !(0.0 <= cfg.f_min && cfg.f_min < cfg.f_max) {
        return Err(Error::Config(format!(
            "band edges must satisfy 0 <= f_min < f_max, got [{}, {}]",
            cfg.f_min, cfg.f_max
        )));
    }
    if cfg.f_max >= nyquist {
        return Err(Error::Config(format!(
            "top center {} Hz must stay below the Nyquist frequency {nyquist} Hz",
            cfg.f_max
        )));
    }
    if n_fft < 2 {
        return Err(Error::Config("FFT size must be at least two samples".into()));
    }

    let centers: Vec<f64> = if cfg.n_filters == 1 {
        vec![cfg.f_min]
    } else {
        let (lo, hi) = (erb_rate(cfg.f_min), erb_rate(cfg.f_max));
        let step = (hi - lo) / (cfg.n_filters - 1) as f64;
        (0..cfg.n_filters).map(|i| erb_rate_to_hz(lo + i as f64 * step)).collect()
    };

    let bins = n_fft / 2 + 1;
    let bin_hz = sample_rate as f64 / n_fft as f64;
    let tau = std::f64::consts::TAU;
    let factorial: f64 = (1..cfg.order).map(|i| i as f64).product();
    let gain = factorial / 2.0;
    let phasor = Complex::new(0.0, cfg.phase).exp();

    let mut weights = vec![0.0f32; cfg.n_filters * bins];
    for (i, &fc) in centers.iter().enumerate() {
        let bw = tau * cfg.bandwidth_scale * erb(fc);
        let mut row = vec![0.0f64; bins];
        let mut peak = 0.0f64;
        for (k, slot) in row.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            let lower = Complex::new(bw, tau * (f - fc)).powi(-(cfg.order as i32));
            let upper = Complex::new(bw, tau * (f + fc)).powi(-(cfg.order as i32));
            *slot = (gain * (phasor * lower + phasor.conj() * upper)).norm();
            peak = peak.max(*slot);
        }
        for (k, v) in row.into_iter().enumerate() {
            weights[i * bins + k] = (v / peak) as f32;
        }
    }

    FilterBank::from_weights(
        Tensor::from_vec(&[cfg.n_filters, bins], weights)?,
        centers,
        BankKind::Gammatone,
    )
}

/// Log-compressed gammatone spectrogram:
/// `log10(max(bank × stft, 1e-10))`.
pub fn gamma_spec(spec: &Spectrogram, bank: &FilterBank) -> Result<Spectrogram> {
    if spec.kind() != TransformKind::Stft {
        return Err(Error::Input(format!(
            "gammatone weighting expects a magnitude STFT, got {}",
            spec.kind().tag()
        )));
    }
    if bank.kind() != BankKind::Gammatone {
        return Err(Error::Input("gamma_spec expects a gammatone filter bank".into()));
    }
    banked_log_spec(bank, spec, TransformKind::Gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::types::LOG_FLOOR;

    fn pseudo(n: usize, seed: u64) -> Vec<f32> {
        let mut state = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).max(1);
        (0..n)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                0.5 + 1.5 * ((state >> 11) as f32 / (1u64 << 53) as f32)
            })
            .collect()
    }

    #[test]
    fn erb_fixes_zero_and_the_kilohertz_point() {
        assert_eq!(erb(0.0), 24.7);
        // 24.7·(4.37 + 1), evaluated independently.
        assert!((erb(1000.0) - 132.639).abs() < 1e-9);
        assert!((erb_rate(1000.0) - 15.57201668091027).abs() < 1e-9);
        assert!((erb_rate_to_hz(erb_rate(3456.0)) - 3456.0).abs() < 1e-6);
    }

    #[test]
    fn centers_are_equally_spaced_on_the_erb_rate_scale() {
        let cfg = GammatoneConfig::new(64, 100.0, 7800.0);
        let bank = gammatone_bank(&cfg, 2048, 16000).unwrap();
        assert_eq!(bank.bands(), 64);
        let rates: Vec<f64> = bank.centers_hz().iter().map(|&c| erb_rate(c)).collect();
        let step = rates[1] - rates[0];
        for w in rates.windows(2) {
            assert!((w[1] - w[0] - step).abs() < 1e-9, "uneven ERB-rate spacing");
        }
        assert!((bank.centers_hz()[0] - 100.0).abs() < 1e-6);
        assert!((bank.centers_hz()[63] - 7800.0).abs() < 1e-6);
    }

    #[test]
    fn rows_peak_at_the_bin_nearest_their_center() {
        let cfg = GammatoneConfig::new(64, 100.0, 7800.0);
        let bank = gammatone_bank(&cfg, 2048, 16000).unwrap();
        let bin_hz = 16000.0 / 2048.0;
        for (i, &fc) in bank.centers_hz().iter().enumerate() {
            let row = &bank.weights().data()[i * 1025..(i + 1) * 1025];
            let peak_bin = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(peak_bin, (fc / bin_hz).round() as usize, "row {i} center {fc}");
            assert_eq!(row[peak_bin], 1.0, "row {i} is not unit-peak");
        }
    }

    #[test]
    fn invalid_bands_are_configuration_errors() {
        assert!(gammatone_bank(&GammatoneConfig::new(8, 100.0, 8000.0), 512, 16000)
            .unwrap_err()
            .is_config());
        assert!(gammatone_bank(&GammatoneConfig::new(8, 500.0, 200.0), 512, 16000)
            .unwrap_err()
            .is_config());
        assert!(gammatone_bank(&GammatoneConfig::new(0, 100.0, 7000.0), 512, 16000)
            .unwrap_err()
            .is_config());
    }

    #[test]
    fn single_filter_sits_at_the_lower_edge() {
        let bank = gammatone_bank(&GammatoneConfig::new(1, 440.0, 7000.0), 512, 16000).unwrap();
        assert_eq!(bank.centers_hz(), &[440.0]);
    }

    fn stft_like(f: usize, t: usize, seed: u64) -> Spectrogram {
        Spectrogram::new(
            Tensor::from_vec(&[f, t], pseudo(f * t, seed)).unwrap(),
            (0..f).map(|i| i as f64 * 31.25).collect(),
            256,
            TransformKind::Stft,
        )
        .unwrap()
    }

    #[test]
    fn matches_a_nested_loop_product_and_log_oracle() {
        let spec = stft_like(257, 4, 91);
        let bank = gammatone_bank(&GammatoneConfig::new(6, 200.0, 7000.0), 512, 16000).unwrap();
        let got = gamma_spec(&spec, &bank).unwrap();
        assert_eq!(got.kind(), TransformKind::Gamma);

        let mut oracle = vec![0.0f64; 6 * 4];
        for i in 0..6 {
            for t in 0..4 {
                let mut acc = 0.0f64;
                for j in 0..257 {
                    acc += bank.weights().data()[i * 257 + j] as f64 * spec.at(j, t) as f64;
                }
                oracle[i * 4 + t] = acc.max(LOG_FLOOR).log10();
            }
        }
        let peak = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (g, w) in got.values().data().iter().zip(&oracle) {
            assert!((*g as f64 - w).abs() < 1e-7 * peak, "{g} vs {w}");
        }
    }

    #[test]
    fn zero_input_hits_the_log_floor() {
        let spec = Spectrogram::new(
            Tensor::from_vec(&[257, 3], vec![0.0; 257 * 3]).unwrap(),
            (0..257).map(|i| i as f64 * 31.25).collect(),
            64,
            TransformKind::Stft,
        )
        .unwrap();
        let bank = gammatone_bank(&GammatoneConfig::new(4, 200.0, 7000.0), 512, 16000).unwrap();
        let out = gamma_spec(&spec, &bank).unwrap();
        assert!(out.values().data().iter().all(|&v| v == -10.0));
    }

    #[test]
    fn raising_any_input_never_lowers_any_output() {
        let spec = stft_like(257, 2, 101);
        let bank = gammatone_bank(&GammatoneConfig::new(4, 200.0, 7000.0), 512, 16000).unwrap();
        let base = gamma_spec(&spec, &bank).unwrap();
        for bump_at in [0usize, 100, 257, 400, 513] {
            let mut data = spec.values().data().to_vec();
            data[bump_at] += 0.75;
            let bumped = Spectrogram::new(
                Tensor::from_vec(&[257, 2], data).unwrap(),
                spec.freq_axis().to_vec(),
                spec.frame_hop(),
                TransformKind::Stft,
            )
            .unwrap();
            let out = gamma_spec(&bumped, &bank).unwrap();
            for (a, b) in base.values().data().iter().zip(out.values().data()) {
                assert!(b >= a, "gamma spectrogram not monotone: {b} < {a}");
            }
        }
    }

    #[test]
    fn rejects_a_mel_bank() {
        let spec = stft_like(9, 2, 111);
        let bank = crate::dsp::mel::mel_filterbank(3, 0.0, 8000.0, 16, 16000).unwrap();
        assert!(matches!(gamma_spec(&spec, &bank), Err(Error::Input(_))));
    }
}
