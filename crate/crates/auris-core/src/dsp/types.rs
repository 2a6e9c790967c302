//! Shared time-frequency domain types: spectrograms and filter banks.

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Value added inside every logarithm so silence maps to a finite floor
/// (`log10(LOG_FLOOR) = -10`) instead of −∞.
pub const LOG_FLOOR: f64 = 1e-10;

/// Which transform produced a spectrogram. Magnitude-domain kinds carry
/// non-negative values; log- and cosine-domain kinds may be negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransformKind {
    Stft,
    LogMel,
    Mfcc,
    Gamma,
    Cqt,
}

impl TransformKind {
    /// True for kinds whose values are magnitudes (and therefore ≥ 0).
    pub fn is_magnitude(self) -> bool {
        matches!(self, TransformKind::Stft | TransformKind::Cqt)
    }

    /// Short lowercase tag used in cache file names and reports.
    pub fn tag(self) -> &'static str {
        match self {
            TransformKind::Stft => "stft",
            TransformKind::LogMel => "logmel",
            TransformKind::Mfcc => "mfcc",
            TransformKind::Gamma => "gamma",
            TransformKind::Cqt => "cqt",
        }
    }
}

/// A time-frequency matrix: `values` is F×T (rows are frequency, columns
/// are frames), `freq_axis` gives each row's center frequency in Hz (or
/// the coefficient index for cosine-domain data), and `frame_hop` is the
/// hop between frame starts in samples of the source clip.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    values: Tensor<f32>,
    freq_axis: Vec<f64>,
    frame_hop: usize,
    kind: TransformKind,
}

impl Spectrogram {
    /// Validates and wraps a spectrogram matrix.
    pub fn new(
        values: Tensor<f32>,
        freq_axis: Vec<f64>,
        frame_hop: usize,
        kind: TransformKind,
    ) -> Result<Self> {
        let shape = values.shape();
        if shape.len() != 2 {
            return Err(Error::Shape(format!(
                "spectrogram expects a rank-2 matrix, got rank {}",
                shape.len()
            )));
        }
        let (f, t) = (shape[0], shape[1]);
        if f == 0 || t == 0 {
            return Err(Error::Shape(format!("spectrogram must be non-empty, got {f}x{t}")));
        }
        if freq_axis.len() != f {
            return Err(Error::Shape(format!(
                "freq axis has {} entries for {} rows",
                freq_axis.len(),
                f
            )));
        }
        if frame_hop == 0 {
            return Err(Error::Config("frame hop must be at least one sample".into()));
        }
        if !values.all_finite() {
            return Err(Error::Numeric("spectrogram contains non-finite values".into()));
        }
        if kind.is_magnitude() && values.data().iter().any(|&v| v < 0.0) {
            return Err(Error::Numeric(format!(
                "{} spectrogram contains negative magnitudes",
                kind.tag()
            )));
        }
        Ok(Spectrogram { values, freq_axis, frame_hop, kind })
    }

    pub fn values(&self) -> &Tensor<f32> {
        &self.values
    }

    pub fn into_values(self) -> Tensor<f32> {
        self.values
    }

    pub fn freq_axis(&self) -> &[f64] {
        &self.freq_axis
    }

    pub fn frame_hop(&self) -> usize {
        self.frame_hop
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    /// Number of frequency rows (F).
    pub fn rows(&self) -> usize {
        self.values.shape()[0]
    }

    /// Number of time frames (T).
    pub fn frames(&self) -> usize {
        self.values.shape()[1]
    }

    /// Value at frequency row `f`, frame `t`.
    pub fn at(&self, f: usize, t: usize) -> f32 {
        self.values.data()[f * self.frames() + t]
    }
}

/// Which auditory scale a filter bank models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BankKind {
    Mel,
    Gammatone,
}

/// A spectral weighting matrix. `weights` is F_out×F_in: row i holds the
/// response of output band i across the F_in input bins. Every row carries
/// at least one positive weight so no output band is dead.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    weights: Tensor<f32>,
    centers_hz: Vec<f64>,
    kind: BankKind,
}

impl FilterBank {
    /// Validates and wraps a weight matrix with its band centers.
    pub fn from_weights(weights: Tensor<f32>, centers_hz: Vec<f64>, kind: BankKind) -> Result<Self> {
        let shape = weights.shape();
        if shape.len() != 2 || shape[0] == 0 || shape[1] == 0 {
            return Err(Error::Shape(format!("filter bank expects a non-empty matrix, got {shape:?}")));
        }
        let (rows, cols) = (shape[0], shape[1]);
        if centers_hz.len() != rows {
            return Err(Error::Shape(format!(
                "{} centers for {rows} filter rows",
                centers_hz.len()
            )));
        }
        for (i, row) in weights.data().chunks_exact(cols).enumerate() {
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Numeric(format!("filter row {i} has negative or non-finite weights")));
            }
            if row.iter().all(|&v| v == 0.0) {
                return Err(Error::Config(format!(
                    "filter row {i} (center {:.1} Hz) has no positive weight; \
                     increase the FFT size or reduce the filter count",
                    centers_hz[i]
                )));
            }
        }
        Ok(FilterBank { weights, centers_hz, kind })
    }

    pub fn weights(&self) -> &Tensor<f32> {
        &self.weights
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    pub fn kind(&self) -> BankKind {
        self.kind
    }

    /// Number of output bands (rows).
    pub fn bands(&self) -> usize {
        self.weights.shape()[0]
    }

    /// Number of input bins the bank expects (columns).
    pub fn input_bins(&self) -> usize {
        self.weights.shape()[1]
    }
}

/// Applies a filter bank to a spectrogram without any logarithm: plain
/// matrix product `weights × values`, accumulated in f64. The transform
/// kind is preserved (a weighted magnitude is still a magnitude), while the
/// frequency axis becomes the bank's band centers.
pub fn apply_bank(bank: &FilterBank, spec: &Spectrogram) -> Result<Spectrogram> {
    if bank.input_bins() != spec.rows() {
        return Err(Error::Shape(format!(
            "bank expects {} input bins but spectrogram has {} rows",
            bank.input_bins(),
            spec.rows()
        )));
    }
    let (bands, frames) = (bank.bands(), spec.frames());
    let bins = bank.input_bins();
    let w = bank.weights().data();
    let s = spec.values().data();
    let mut out = vec![0.0f64; bands * frames];
    for i in 0..bands {
        let dst = &mut out[i * frames..(i + 1) * frames];
        for j in 0..bins {
            let wij = w[i * bins + j] as f64;
            if wij == 0.0 {
                continue;
            }
            let src = &s[j * frames..(j + 1) * frames];
            for (d, &v) in dst.iter_mut().zip(src) {
                *d += wij * v as f64;
            }
        }
    }
    let values = Tensor::from_vec(&[bands, frames], out.into_iter().map(|v| v as f32).collect())?;
    Spectrogram::new(values, bank.centers_hz().to_vec(), spec.frame_hop(), spec.kind())
}

/// Shared log-compression step for banked spectrograms:
/// `log10(max(weights × values, LOG_FLOOR))`, computed in f64.
pub(crate) fn banked_log_spec(
    bank: &FilterBank,
    spec: &Spectrogram,
    out_kind: TransformKind,
) -> Result<Spectrogram> {
    let weighted = apply_bank(bank, spec)?;
    let frames = weighted.frames();
    let data: Vec<f32> = weighted
        .values()
        .data()
        .iter()
        .map(|&v| (v as f64).max(LOG_FLOOR).log10() as f32)
        .collect();
    let values = Tensor::from_vec(&[weighted.rows(), frames], data)?;
    Spectrogram::new(values, bank.centers_hz().to_vec(), spec.frame_hop(), out_kind)
}
