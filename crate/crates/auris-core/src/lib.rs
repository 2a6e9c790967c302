//! Self-contained machine-hearing toolkit.
//!
//! The crate covers the full path from raw audio to scored predictions:
//!
//! * [`dataset`] — WAV ingest, channel selection, resampling, event slicing,
//!   deterministic splits, manifests, and a synthetic labelled corpus;
//! * [`dsp`] — STFT, log-mel, MFCC, gammatone and constant-Q spectrograms,
//!   patch splitting, and the binary feature-cache format;
//! * [`nn`] — a small trainable CNN engine (conv / batch-norm / ReLU /
//!   dropout / pooling / dense / softmax) with analytic gradients and Adam;
//! * [`models`] — the classifier family built on that engine: single-stream
//!   CNN baselines, a three-spectrogram encoder with branch combiners,
//!   dense / mixture-of-experts / random-forest decoders, a two-level
//!   hierarchy, and a compact student for distillation;
//! * [`training`] — losses, mixup augmentation, and the training loops;
//! * [`eval`] — patch aggregation, stream fusion, accuracy and
//!   sensitivity/specificity scoring, early-classification curves, reports.
//!
//! Everything is deterministic given the seeds carried in the relevant
//! configs; see [`rng`] for the stream-derivation scheme.

pub mod dataset;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod models;
pub mod nn;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
