//! Time-frequency transforms and the patch extractor feeding the networks.
//!
//! All transforms are pure and deterministic: identical input yields
//! bit-identical output. Internal arithmetic runs in f64; results are
//! stored as f32 matrices.

mod cache;
mod cqt;
mod gammatone;
mod mel;
mod mfcc;
mod patch;
mod stft;
mod types;

pub use cache::{load_tensor, save_tensor};
pub use cqt::{cqt, CqtConfig};
pub use gammatone::{erb, erb_rate, gamma_spec, gammatone_bank, GammatoneConfig};
pub use mel::{hz_to_mel, log_mel, mel_filterbank, mel_to_hz};
pub use mfcc::mfcc;
pub use patch::{split_patches, PatchOverlap, PatchSet};
pub use stft::stft;
pub use types::{apply_bank, BankKind, FilterBank, Spectrogram, TransformKind, LOG_FLOOR};
