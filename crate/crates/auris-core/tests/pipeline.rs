//! End-to-end front-end checks: synthetic corpus → spectrogram features.

use auris_core::dataset::{load_clip, synth_corpus, SynthSpec};
use auris_core::dsp::{log_mel, mel_filterbank, stft};

/// The synthetic classes must be separable from spectral shape alone,
/// otherwise downstream training runs say nothing. Nearest-centroid on
/// time-averaged log-mel vectors, trained on even clips and scored on odd
/// clips, has to clear 80%.
#[test]
fn synthetic_classes_are_separable_in_log_mel_space() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec { classes: 3, per_class: 8, duration_s: 1.0, sample_rate: 16000, seed: 7 };
    let records = synth_corpus(&spec, dir.path()).unwrap();
    let bank = mel_filterbank(64, 50.0, 8000.0, 2048, 16000).unwrap();

    let mut features: Vec<(usize, Vec<f64>)> = Vec::new();
    for (i, record) in records.iter().enumerate() {
        let clip = load_clip(&record.path).unwrap();
        let spectrum = stft(&clip, 1024, 256, 2048).unwrap();
        let logged = log_mel(&spectrum, &bank).unwrap();
        let (f, t) = (logged.rows(), logged.frames());
        let mean: Vec<f64> = (0..f)
            .map(|row| (0..t).map(|col| logged.at(row, col) as f64).sum::<f64>() / t as f64)
            .collect();
        features.push((i / 8, mean));
    }

    let mut centroids = vec![vec![0.0f64; 64]; 3];
    let mut counts = [0usize; 3];
    for (i, (class, feat)) in features.iter().enumerate() {
        if i % 2 == 0 {
            for (c, v) in centroids[*class].iter_mut().zip(feat) {
                *c += v;
            }
            counts[*class] += 1;
        }
    }
    for (centroid, count) in centroids.iter_mut().zip(counts) {
        for c in centroid.iter_mut() {
            *c /= count as f64;
        }
    }

    let (mut correct, mut total) = (0, 0);
    for (i, (class, feat)) in features.iter().enumerate() {
        if i % 2 == 1 {
            let nearest = centroids
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    let da: f64 = a.iter().zip(feat).map(|(x, y)| (x - y) * (x - y)).sum();
                    let db: f64 = b.iter().zip(feat).map(|(x, y)| (x - y) * (x - y)).sum();
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap()
                .0;
            correct += usize::from(nearest == *class);
            total += 1;
        }
    }
    let accuracy = 100.0 * correct as f64 / total as f64;
    assert!(accuracy > 80.0, "log-mel nearest-centroid accuracy only {accuracy:.1}%");
}
