//! Audio ingestion and corpus management: WAV reading and writing, channel
//! reduction, resampling, annotated-cycle extraction, duration tiling,
//! manifest files, seeded train/test splitting, and a deterministic
//! synthetic corpus generator for desk-scale experiments.

mod clip;
mod manifest;
mod resample;
mod split;
mod synth;
mod wav;

pub use clip::{enforce_min_duration, extract_cycle, reduce_channels, AudioClip, ChannelSelect};
pub use manifest::{label_set, read_manifest, write_manifest, CycleAnnotation, ManifestRecord};
pub use resample::resample;
pub use split::{make_splits, SplitScheme, SplitSpec};
pub use synth::{synth_corpus, SynthSpec};
pub use wav::{load_clip, load_clip_channel, write_clip};
