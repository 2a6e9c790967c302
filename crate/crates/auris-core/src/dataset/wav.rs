//! Minimal RIFF/WAV codec for 16-bit PCM, the only encoding the toolkit
//! ingests or emits. The reader walks the chunk list (skipping unknown
//! chunks), accepts mono or stereo, and reduces to mono through a
//! [`ChannelSelect`]; the writer produces a canonical 44-byte-header file,
//! so identical samples serialize to identical bytes.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::dataset::clip::{reduce_channels, AudioClip, ChannelSelect};
use crate::error::{Error, Result};

/// 16-bit PCM quantization step: decoded amplitude = sample / 32768.
const PCM_SCALE: f32 = 32768.0;

fn ingest<T>(path: &Path, reason: impl Into<String>) -> Result<T> {
    Err(Error::Ingest { path: path.to_path_buf(), reason: reason.into() })
}

fn le_u16(bytes: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([bytes[at], bytes[at + 1]])
}

fn le_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

/// Loads a 16-bit PCM WAV file, reducing stereo to mono with `select`.
pub fn load_clip_channel(path: impl AsRef<Path>, select: ChannelSelect) -> Result<AudioClip> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return ingest(path, "not a RIFF/WAVE file");
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // format, channels, rate, bits
    let mut data: Option<&[u8]> = None;
    let mut at = 12;
    while at + 8 <= bytes.len() {
        let id = &bytes[at..at + 4];
        let size = le_u32(&bytes, at + 4) as usize;
        let body_end = at + 8 + size;
        if body_end > bytes.len() {
            return ingest(path, format!("chunk {:?} truncated", String::from_utf8_lossy(id)));
        }
        let body = &bytes[at + 8..body_end];
        match id {
            b"fmt " => {
                if size < 16 {
                    return ingest(path, "fmt chunk too short");
                }
                fmt = Some((le_u16(body, 0), le_u16(body, 2), le_u32(body, 4), le_u16(body, 14)));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word-aligned; odd sizes carry one pad byte.
        at = body_end + size % 2;
    }

    let Some((format, channels, rate, bits)) = fmt else {
        return ingest(path, "missing fmt chunk");
    };
    let Some(data) = data else {
        return ingest(path, "missing data chunk");
    };
    if format != 1 {
        return ingest(path, format!("unsupported encoding tag {format}, want PCM (1)"));
    }
    if bits != 16 {
        return ingest(path, format!("unsupported bit depth {bits}, want 16"));
    }
    if !(1..=2).contains(&channels) {
        return ingest(path, format!("unsupported channel count {channels}"));
    }
    if data.len() % (2 * channels as usize) != 0 {
        return ingest(path, "data chunk does not hold whole frames");
    }

    let interleaved: Vec<f32> = data
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]) as f32 / PCM_SCALE)
        .collect();
    if interleaved.is_empty() {
        return ingest(path, "empty data chunk");
    }
    let mono = reduce_channels(&interleaved, channels, select)?;
    AudioClip::new(mono, rate)
}

/// Loads a WAV file with the default first-channel reduction.
pub fn load_clip(path: impl AsRef<Path>) -> Result<AudioClip> {
    load_clip_channel(path, ChannelSelect::First)
}

/// Writes a clip as mono 16-bit PCM. Amplitudes quantize to the nearest
/// step, so a written-then-reloaded clip matches within one quantization
/// step.
pub fn write_clip(path: impl AsRef<Path>, clip: &AudioClip) -> Result<()> {
    let data_len = 2 * clip.len() as u32;
    let rate = clip.sample_rate();
    let mut bytes = Vec::with_capacity(44 + data_len as usize);
    bytes.extend_from_slice(b"RIFF");
    bytes.extend_from_slice(&(36 + data_len).to_le_bytes());
    bytes.extend_from_slice(b"WAVE");
    bytes.extend_from_slice(b"fmt ");
    bytes.extend_from_slice(&16u32.to_le_bytes());
    bytes.extend_from_slice(&1u16.to_le_bytes()); // PCM
    bytes.extend_from_slice(&1u16.to_le_bytes()); // mono
    bytes.extend_from_slice(&rate.to_le_bytes());
    bytes.extend_from_slice(&(2 * rate).to_le_bytes()); // byte rate
    bytes.extend_from_slice(&2u16.to_le_bytes()); // block align
    bytes.extend_from_slice(&16u16.to_le_bytes());
    bytes.extend_from_slice(b"data");
    bytes.extend_from_slice(&data_len.to_le_bytes());
    for &v in clip.samples() {
        let q = (v * PCM_SCALE).round().clamp(i16::MIN as f32, i16::MAX as f32) as i16;
        bytes.extend_from_slice(&q.to_le_bytes());
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        (dir, path)
    }

    #[test]
    fn silence_round_trips_exactly() {
        let (_dir, path) = tmp("silence.wav");
        let clip = AudioClip::new(vec![0.0; 16000], 16000).unwrap();
        write_clip(&path, &clip).unwrap();
        let back = load_clip(&path).unwrap();
        assert_eq!(back.sample_rate(), 16000);
        assert_eq!(back.samples(), clip.samples());
    }

    #[test]
    fn written_then_reloaded_matches_within_one_quantization_step() {
        let (_dir, path) = tmp("tone.wav");
        let samples: Vec<f32> =
            (0..4000).map(|i| (0.9 * (i as f32 * 0.31).sin()).clamp(-1.0, 1.0)).collect();
        let clip = AudioClip::new(samples, 8000).unwrap();
        write_clip(&path, &clip).unwrap();
        let back = load_clip(&path).unwrap();
        for (a, b) in clip.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() <= 1.0 / PCM_SCALE, "{a} vs {b}");
        }
    }

    #[test]
    fn quantized_values_round_trip_bit_exactly() {
        // Samples already on the 16-bit grid must survive unchanged.
        let (_dir, path) = tmp("grid.wav");
        let samples: Vec<f32> = (-4i32..4).map(|q| q as f32 * 1000.0 / PCM_SCALE).collect();
        let clip = AudioClip::new(samples.clone(), 44100).unwrap();
        write_clip(&path, &clip).unwrap();
        assert_eq!(load_clip(&path).unwrap().samples(), samples.as_slice());
    }

    /// Hand-assembles a stereo file to check channel selection against the
    /// interleaving layout.
    #[test]
    fn stereo_channels_deinterleave_correctly() {
        let (_dir, path) = tmp("stereo.wav");
        let left: Vec<i16> = vec![100, 200, 300];
        let right: Vec<i16> = vec![-100, -200, -300];
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&(36u32 + 12).to_le_bytes());
        bytes.extend_from_slice(b"WAVE");
        bytes.extend_from_slice(b"fmt ");
        bytes.extend_from_slice(&16u32.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&2u16.to_le_bytes());
        bytes.extend_from_slice(&16000u32.to_le_bytes());
        bytes.extend_from_slice(&64000u32.to_le_bytes());
        bytes.extend_from_slice(&4u16.to_le_bytes());
        bytes.extend_from_slice(&16u16.to_le_bytes());
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&12u32.to_le_bytes());
        for i in 0..3 {
            bytes.extend_from_slice(&left[i].to_le_bytes());
            bytes.extend_from_slice(&right[i].to_le_bytes());
        }
        std::fs::write(&path, bytes).unwrap();

        let first = load_clip_channel(&path, ChannelSelect::First).unwrap();
        assert_eq!(first.len(), 3);
        for i in 0..3 {
            assert!((first.samples()[i] - left[i] as f32 / PCM_SCALE).abs() < 1e-7);
        }
        let second = load_clip_channel(&path, ChannelSelect::Second).unwrap();
        for i in 0..3 {
            assert!((second.samples()[i] - right[i] as f32 / PCM_SCALE).abs() < 1e-7);
        }
    }

    #[test]
    fn unknown_chunks_are_skipped() {
        let (_dir, path) = tmp("listed.wav");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&(4u32 + 8 + 6 + 8 + 16 + 8 + 4).to_le_bytes());
        bytes.extend_from_slice(b"WAVE");
        bytes.extend_from_slice(b"LIST");
        bytes.extend_from_slice(&5u32.to_le_bytes());
        bytes.extend_from_slice(b"INFOx\0"); // odd size → one pad byte
        bytes.extend_from_slice(b"fmt ");
        bytes.extend_from_slice(&16u32.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&8000u32.to_le_bytes());
        bytes.extend_from_slice(&16000u32.to_le_bytes());
        bytes.extend_from_slice(&2u16.to_le_bytes());
        bytes.extend_from_slice(&16u16.to_le_bytes());
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&4u32.to_le_bytes());
        bytes.extend_from_slice(&123i16.to_le_bytes());
        bytes.extend_from_slice(&(-456i16).to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        let clip = load_clip(&path).unwrap();
        assert_eq!(clip.len(), 2);
        assert_eq!(clip.sample_rate(), 8000);
    }

    #[test]
    fn truncated_and_foreign_files_are_ingestion_errors() {
        let (_dir, path) = tmp("bad.wav");
        std::fs::write(&path, b"RIFF????WAVEdata").unwrap();
        assert!(matches!(load_clip(&path), Err(Error::Ingest { .. })));
        std::fs::write(&path, b"not audio at all").unwrap();
        assert!(matches!(load_clip(&path), Err(Error::Ingest { .. })));
        let clip = AudioClip::new(vec![0.25; 100], 8000).unwrap();
        write_clip(&path, &clip).unwrap();
        let full = std::fs::read(&path).unwrap();
        std::fs::write(&path, &full[..60]).unwrap();
        assert!(matches!(load_clip(&path), Err(Error::Ingest { .. })));
    }

    #[test]
    fn float_or_24bit_encodings_are_rejected() {
        let (_dir, path) = tmp("float.wav");
        let clip = AudioClip::new(vec![0.5; 10], 8000).unwrap();
        write_clip(&path, &clip).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[20] = 3; // IEEE float tag
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_clip(&path), Err(Error::Ingest { .. })));
    }
}
