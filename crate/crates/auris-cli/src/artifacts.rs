//! Artifact files: hash-stamped text outputs and the prediction CSV
//! interchange format (`clip_id,prob_1..prob_C`).
//!
//! Every file begins with `# config <pipeline-hash>` so any artifact can
//! be traced to the exact configuration that produced it. Probabilities
//! are written with Rust's shortest-round-trip float formatting, so a
//! file read back yields bit-identical `f32` values — fusion of saved
//! predictions loses nothing against in-memory fusion.

use std::fmt::Write as _;
use std::path::Path;

use auris_core::error::{Error, Result};

/// The provenance line opening every artifact.
pub fn stamp(pipeline_hash: u64) -> String {
    format!("# config {pipeline_hash:016x}\n")
}

/// Writes a text artifact with its provenance stamp.
pub fn write_artifact(path: impl AsRef<Path>, pipeline_hash: u64, body: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, format!("{}{body}", stamp(pipeline_hash)))?;
    Ok(())
}

/// Writes per-clip probabilities as `clip_id,prob_1..prob_C` rows.
pub fn write_predictions(
    path: impl AsRef<Path>,
    pipeline_hash: u64,
    rows: &[(String, Vec<f32>)],
) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Input("no predictions to write".into()));
    }
    let classes = rows[0].1.len();
    let mut body = String::from("clip_id");
    for c in 1..=classes {
        let _ = write!(body, ",prob_{c}");
    }
    body.push('\n');
    for (id, probs) in rows {
        if probs.len() != classes {
            return Err(Error::Shape(format!(
                "clip `{id}` carries {} probabilities, the header promises {classes}",
                probs.len()
            )));
        }
        body.push_str(id);
        for &p in probs {
            let _ = write!(body, ",{p}");
        }
        body.push('\n');
    }
    write_artifact(path, pipeline_hash, &body)
}

/// Reads a prediction CSV written by [`write_predictions`] (stamp and
/// header tolerated but not required beyond the column layout).
pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<(String, Vec<f32>)>> {
    let path = path.as_ref();
    let ingest = |reason: String| Error::Ingest { path: path.to_path_buf(), reason };
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    let mut classes: Option<usize> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("clip_id,") {
            continue;
        }
        let mut fields = line.split(',');
        let id = fields.next().expect("split yields at least one field").to_string();
        let probs: Vec<f32> = fields
            .map(|f| {
                f.trim().parse::<f32>().map_err(|_| {
                    ingest(format!("line {}: `{f}` is not a number", lineno + 1))
                })
            })
            .collect::<Result<_>>()?;
        if probs.is_empty() {
            return Err(ingest(format!("line {}: no probabilities after `{id}`", lineno + 1)));
        }
        match classes {
            None => classes = Some(probs.len()),
            Some(c) if c != probs.len() => {
                return Err(ingest(format!(
                    "line {}: {} probabilities where earlier rows had {c}",
                    lineno + 1,
                    probs.len()
                )));
            }
            _ => {}
        }
        rows.push((id, probs));
    }
    if rows.is_empty() {
        return Err(ingest("no prediction rows".into()));
    }
    Ok(rows)
}
