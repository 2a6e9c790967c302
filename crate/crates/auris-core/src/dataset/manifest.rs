//! Corpus manifests: one CSV row per clip with its label, optional
//! key=value metadata (device, patient, …) and optional annotated cycles.
//!
//! The format is deliberately plain text — `path,label,meta,annotations`
//! with `k=v|k=v` metadata and `onset:offset:label;…` annotations — so
//! manifests diff cleanly and can be assembled by hand.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

const HEADER: &str = "path,label,meta,annotations";

/// One annotated span inside a clip, in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleAnnotation {
    pub onset_s: f64,
    pub offset_s: f64,
    pub label: String,
}

/// One manifest row: a clip on disk plus its labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRecord {
    pub path: PathBuf,
    pub label: String,
    /// Group labels (meta-category, device id, patient id, …), kept sorted
    /// so serialization is deterministic.
    pub meta: BTreeMap<String, String>,
    pub annotations: Vec<CycleAnnotation>,
}

impl ManifestRecord {
    /// A record with just a path and class label.
    pub fn new(path: impl Into<PathBuf>, label: impl Into<String>) -> Self {
        ManifestRecord {
            path: path.into(),
            label: label.into(),
            meta: BTreeMap::new(),
            annotations: Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        let path = self.path.to_string_lossy();
        if path.is_empty() || path.contains(',') {
            return Err(Error::Config(format!("manifest path {path:?} empty or holds a comma")));
        }
        if self.label.is_empty() || self.label.contains(',') {
            return Err(Error::Config(format!(
                "manifest label {:?} empty or holds a comma",
                self.label
            )));
        }
        for (k, v) in &self.meta {
            if k.is_empty() || k.contains(['=', '|', ',']) || v.contains(['=', '|', ',']) {
                return Err(Error::Config(format!("manifest metadata {k:?}={v:?} not encodable")));
            }
        }
        for a in &self.annotations {
            if !(a.offset_s > a.onset_s && a.onset_s >= 0.0) {
                return Err(Error::Config(format!(
                    "annotation {}..{} must satisfy 0 ≤ onset < offset",
                    a.onset_s, a.offset_s
                )));
            }
            if a.label.is_empty() || a.label.contains([':', ';', ',']) {
                return Err(Error::Config(format!("annotation label {:?} not encodable", a.label)));
            }
        }
        Ok(())
    }
}

/// Sorted set of distinct class labels appearing in `records`.
pub fn label_set(records: &[ManifestRecord]) -> Vec<String> {
    let mut labels: Vec<String> = records.iter().map(|r| r.label.clone()).collect();
    labels.sort();
    labels.dedup();
    labels
}

/// Writes `records` as a manifest CSV.
pub fn write_manifest(path: impl AsRef<Path>, records: &[ManifestRecord]) -> Result<()> {
    let mut text = String::from(HEADER);
    text.push('\n');
    for r in records {
        r.validate()?;
        let meta = r
            .meta
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join("|");
        let annotations = r
            .annotations
            .iter()
            .map(|a| format!("{}:{}:{}", a.onset_s, a.offset_s, a.label))
            .collect::<Vec<_>>()
            .join(";");
        writeln!(text, "{},{},{},{}", r.path.to_string_lossy(), r.label, meta, annotations)
            .expect("writing to a String cannot fail");
    }
    fs::write(path, text)?;
    Ok(())
}

/// Reads a manifest CSV written by [`write_manifest`] (or by hand).
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>> {
    let path = path.as_ref();
    let ingest = |line_no: usize, reason: String| Error::Ingest {
        path: path.to_path_buf(),
        reason: format!("line {line_no}: {reason}"),
    };
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first.trim_end() == HEADER => {}
        _ => {
            return Err(Error::Ingest {
                path: path.to_path_buf(),
                reason: format!("manifest must start with header {HEADER:?}"),
            })
        }
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let [clip_path, label, meta_text, ann_text] = fields.as_slice() else {
            return Err(ingest(line_no, format!("want 4 comma-separated fields, got {}", fields.len())));
        };
        if clip_path.is_empty() || label.is_empty() {
            return Err(ingest(line_no, "path and label must be non-empty".into()));
        }
        let mut meta = BTreeMap::new();
        if !meta_text.is_empty() {
            for pair in meta_text.split('|') {
                let Some((k, v)) = pair.split_once('=') else {
                    return Err(ingest(line_no, format!("metadata entry {pair:?} is not k=v")));
                };
                if meta.insert(k.to_string(), v.to_string()).is_some() {
                    return Err(ingest(line_no, format!("duplicate metadata key {k:?}")));
                }
            }
        }
        let mut annotations = Vec::new();
        if !ann_text.is_empty() {
            for triple in ann_text.split(';') {
                let parts: Vec<&str> = triple.splitn(3, ':').collect();
                let [onset, offset, a_label] = parts.as_slice() else {
                    return Err(ingest(
                        line_no,
                        format!("annotation {triple:?} is not onset:offset:label"),
                    ));
                };
                let onset_s: f64 = onset
                    .parse()
                    .map_err(|_| ingest(line_no, format!("bad onset {onset:?}")))?;
                let offset_s: f64 = offset
                    .parse()
                    .map_err(|_| ingest(line_no, format!("bad offset {offset:?}")))?;
                if !(offset_s > onset_s && onset_s >= 0.0) {
                    return Err(ingest(
                        line_no,
                        format!("annotation {onset_s}..{offset_s} must satisfy 0 ≤ onset < offset"),
                    ));
                }
                annotations.push(CycleAnnotation {
                    onset_s,
                    offset_s,
                    label: a_label.to_string(),
                });
            }
        }
        records.push(ManifestRecord {
            path: PathBuf::from(clip_path),
            label: label.to_string(),
            meta,
            annotations,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_records() -> Vec<ManifestRecord> {
        let mut a = ManifestRecord::new("audio/one.wav", "bus");
        a.meta.insert("device".into(), "A".into());
        a.meta.insert("city".into(), "helsinki".into());
        let mut b = ManifestRecord::new("audio/two.wav", "tram");
        b.annotations.push(CycleAnnotation { onset_s: 0.25, offset_s: 1.5, label: "crackle".into() });
        b.annotations.push(CycleAnnotation { onset_s: 1.5, offset_s: 3.0, label: "normal".into() });
        vec![a, b, ManifestRecord::new("audio/three.wav", "bus")]
    }

    #[test]
    fn records_round_trip_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.csv");
        let records = sample_records();
        write_manifest(&path, &records).unwrap();
        let back = read_manifest(&path).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn header_line_is_required() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.csv");
        fs::write(&path, "audio/x.wav,bus,,\n").unwrap();
        assert!(matches!(read_manifest(&path), Err(Error::Ingest { .. })));
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.csv");
        fs::write(&path, format!("{HEADER}\naudio/x.wav,bus\n")).unwrap();
        match read_manifest(&path) {
            Err(Error::Ingest { reason, .. }) => assert!(reason.contains("line 2"), "{reason}"),
            other => panic!("want ingest error, got {other:?}"),
        }
    }

    #[test]
    fn inverted_annotations_are_rejected_both_ways() {
        let mut rec = ManifestRecord::new("x.wav", "bus");
        rec.annotations.push(CycleAnnotation { onset_s: 2.0, offset_s: 1.0, label: "c".into() });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.csv");
        assert!(write_manifest(&path, &[rec]).is_err());
        fs::write(&path, format!("{HEADER}\nx.wav,bus,,2:1:c\n")).unwrap();
        assert!(read_manifest(&path).is_err());
    }

    #[test]
    fn label_set_is_sorted_and_distinct() {
        assert_eq!(label_set(&sample_records()), vec!["bus".to_string(), "tram".to_string()]);
    }

    #[test]
    fn empty_meta_and_annotations_are_fine() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.csv");
        fs::write(&path, format!("{HEADER}\nx.wav,bus,,\n\n")).unwrap();
        let records = read_manifest(&path).unwrap();
        assert_eq!(records.len(), 1);
        assert!(records[0].meta.is_empty());
        assert!(records[0].annotations.is_empty());
    }
}
