//! Deterministic synthetic corpus for desk-scale experiments.
//!
//! Each class is a fixed generative recipe — a class-specific tone chord,
//! a low-passed noise floor and a class-specific amplitude modulation — so
//! classes are separable by their spectra yet overlap enough to be
//! non-trivial. Every clip derives its own random stream from the corpus
//! seed, the class and the clip index, so a corpus is byte-identical across
//! runs and machines.

use std::path::{Path, PathBuf};

use rand::Rng;

use crate::dataset::clip::AudioClip;
use crate::dataset::manifest::ManifestRecord;
use crate::dataset::wav::write_clip;
use crate::error::{Error, Result};
use crate::rng::stream;

/// Corpus dimensions and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub classes: usize,
    pub per_class: usize,
    pub duration_s: f64,
    pub sample_rate: u32,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec { classes: 3, per_class: 20, duration_s: 3.0, sample_rate: 16000, seed: 7 }
    }
}

/// Tone chord of a class: three partials, folded down by octaves until they
/// sit below 90% of Nyquist.
fn class_tones(class: usize, rate: u32) -> [f64; 3] {
    let lift = (0.8 * class as f64).exp2();
    let limit = 0.45 * rate as f64;
    [200.0, 450.0, 1000.0].map(|base| {
        let mut f = base * lift;
        while f > limit {
            f /= 2.0;
        }
        f
    })
}

/// Synthesizes one clip. Draw order (detunes and phases, then modulator
/// phase, then gain, then the noise sequence) is part of the recipe and
/// must not change, or corpora stop being reproducible across versions.
fn render_clip(class: usize, idx: usize, spec: &SynthSpec) -> AudioClip {
    let mut rng = stream(spec.seed, &format!("dataset/synth/c{class}/i{idx}"));
    let rate = spec.sample_rate;
    let len = (spec.duration_s * rate as f64).round() as usize;
    let tones = class_tones(class, rate);
    const TONE_AMPS: [f64; 3] = [0.5, 0.35, 0.25];

    let tau = std::f64::consts::TAU;
    let detuned: Vec<(f64, f64)> = tones
        .iter()
        .map(|&f| {
            let detune = 1.0 + rng.random_range(-0.01..0.01);
            let phase = rng.random_range(0.0..tau);
            (f * detune, phase)
        })
        .collect();
    let mod_rate = 1.5 + 0.9 * class as f64;
    let mod_phase = rng.random_range(0.0..tau);
    let gain = rng.random_range(0.6..0.85);

    // Noise floor: white noise through a one-pole low-pass whose cutoff
    // rises with the class index.
    let cutoff = 500.0 * (class as f64 + 1.0);
    let pole = 1.0 - (-tau * cutoff / rate as f64).exp();
    let mut noise_state = 0.0f64;

    let mut samples = Vec::with_capacity(len);
    let mut peak = 0.0f64;
    for n in 0..len {
        let t = n as f64 / rate as f64;
        let mut v = 0.0;
        for ((f, phase), amp) in detuned.iter().zip(TONE_AMPS) {
            v += amp * (tau * f * t + phase).sin();
        }
        noise_state += pole * (rng.random_range(-1.0..1.0) - noise_state);
        v += 0.03 * noise_state;
        v *= (1.0 + 0.5 * (tau * mod_rate * t + mod_phase).sin()) / 1.5;
        peak = peak.max(v.abs());
        samples.push(v);
    }
    let scale = gain / peak;
    let samples: Vec<f32> = samples.into_iter().map(|v| (v * scale) as f32).collect();
    AudioClip::new(samples, rate).expect("rendered clip is normalized and non-empty")
}

/// Renders the corpus into `out_dir` (one WAV per clip) and returns its
/// manifest records in (class, index) order. Clips carry a `device`
/// metadata key alternating A/B, mimicking a two-device recording setup.
pub fn synth_corpus(spec: &SynthSpec, out_dir: impl AsRef<Path>) -> Result<Vec<ManifestRecord>> {
    if spec.classes == 0 || spec.per_class == 0 {
        return Err(Error::Config("corpus needs at least one class and one clip".into()));
    }
    if !(spec.duration_s > 0.0) || spec.sample_rate == 0 {
        return Err(Error::Config("corpus duration and sample rate must be positive".into()));
    }
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;

    let mut records = Vec::with_capacity(spec.classes * spec.per_class);
    for class in 0..spec.classes {
        for idx in 0..spec.per_class {
            let clip = render_clip(class, idx, spec);
            let path: PathBuf = out_dir.join(format!("c{class:02}_i{idx:03}.wav"));
            write_clip(&path, &clip)?;
            let mut record = ManifestRecord::new(path, format!("class{class:02}"));
            record
                .meta
                .insert("device".into(), if idx % 2 == 0 { "A".into() } else { "B".into() });
            records.push(record);
        }
    }
    Ok(records)
}
