//! Seeded train/test splitting with optional group disjointness.
//!
//! Splitting operates on "units": individual records, or — when a group key
//! is given — whole groups (all records sharing the key's metadata value),
//! so no group ever straddles a fold boundary. Unit order is shuffled by a
//! seeded generator, making every split reproducible.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::dataset::manifest::ManifestRecord;
use crate::error::{Error, Result};
use crate::rng::stream;

/// How records are divided.
#[derive(Debug, Clone, PartialEq)]
pub enum SplitScheme {
    /// `k` folds of near-equal size; fold f serves as the test side of
    /// cross-validation round f.
    KFold { k: usize },
    /// Two folds: fold 0 holds ≈ `train_pct` percent of the units, fold 1
    /// the rest.
    Fraction { train_pct: f64 },
    /// Caller-supplied fold id per record (e.g. from corpus metadata).
    Predefined { folds: Vec<usize> },
}

/// A complete assignment of records to folds.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    n_folds: usize,
    /// Record index → fold id.
    assignment: Vec<usize>,
    group_key: Option<String>,
}

impl SplitSpec {
    pub fn n_folds(&self) -> usize {
        self.n_folds
    }

    pub fn fold_of(&self, record: usize) -> usize {
        self.assignment[record]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn group_key(&self) -> Option<&str> {
        self.group_key.as_deref()
    }

    /// Record indices assigned to `fold`.
    pub fn members(&self, fold: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &f)| f == fold)
            .map(|(i, _)| i)
            .collect()
    }

    /// Cross-validation round `test_fold`: (train records, test records).
    pub fn train_test(&self, test_fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &f) in self.assignment.iter().enumerate() {
            if f == test_fold {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }
}

/// The unit a record belongs to: itself, or its group when a key is set.
fn unit_of(record: &ManifestRecord, idx: usize, key: Option<&str>) -> Result<String> {
    match key {
        None => Ok(idx.to_string()),
        Some(key) => record.meta.get(key).cloned().ok_or_else(|| {
            Error::Config(format!(
                "record {:?} lacks the group key {key:?}",
                record.path.to_string_lossy()
            ))
        }),
    }
}

/// Assigns every record to a fold. `group_key` names a metadata field whose
/// values must never straddle folds (e.g. a patient id); the shuffle is
/// fully determined by `seed`.
pub fn make_splits(
    records: &[ManifestRecord],
    scheme: &SplitScheme,
    group_key: Option<&str>,
    seed: u64,
) -> Result<SplitSpec> {
    if records.is_empty() {
        return Err(Error::Config("cannot split an empty manifest".into()));
    }

    if let SplitScheme::Predefined { folds } = scheme {
        if folds.len() != records.len() {
            return Err(Error::Config(format!(
                "predefined split lists {} folds for {} records",
                folds.len(),
                records.len()
            )));
        }
        let n_folds = folds.iter().max().copied().unwrap_or(0) + 1;
        if let Some(key) = group_key {
            let mut seen: BTreeMap<String, usize> = BTreeMap::new();
            for (i, r) in records.iter().enumerate() {
                let unit = unit_of(r, i, Some(key))?;
                if let Some(&prev) = seen.get(&unit) {
                    if prev != folds[i] {
                        return Err(Error::Config(format!(
                            "predefined split places group {unit:?} in folds {} and {prev}",
                            folds[i]
                        )));
                    }
                } else {
                    seen.insert(unit, folds[i]);
                }
            }
        }
        return Ok(SplitSpec {
            n_folds,
            assignment: folds.clone(),
            group_key: group_key.map(str::to_string),
        });
    }

    // Units in first-appearance order, then a seeded shuffle.
    let mut unit_ids: Vec<String> = Vec::new();
    let mut unit_of_record: Vec<usize> = Vec::with_capacity(records.len());
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        let unit = unit_of(r, i, group_key)?;
        let uid = *index.entry(unit.clone()).or_insert_with(|| {
            unit_ids.push(unit);
            unit_ids.len() - 1
        });
        unit_of_record.push(uid);
    }
    let n_units = unit_ids.len();
    let mut order: Vec<usize> = (0..n_units).collect();
    order.shuffle(&mut stream(seed, "dataset/splits"));

    // position of each unit in the shuffled order
    let mut rank = vec![0usize; n_units];
    for (pos, &u) in order.iter().enumerate() {
        rank[u] = pos;
    }

    let (n_folds, fold_of_rank): (usize, Box<dyn Fn(usize) -> usize>) = match scheme {
        SplitScheme::KFold { k } => {
            let k = *k;
            if k < 2 || k > n_units {
                return Err(Error::Config(format!(
                    "{k}-fold split needs 2 ≤ k ≤ {n_units} units"
                )));
            }
            (k, Box::new(move |pos| pos % k))
        }
        SplitScheme::Fraction { train_pct } => {
            let pct = *train_pct;
            if !(0.0 < pct && pct < 100.0) {
                return Err(Error::Config(format!("train percentage {pct} outside (0, 100)")));
            }
            if n_units < 2 {
                return Err(Error::Config("fractional split needs at least 2 units".into()));
            }
            let train_units =
                ((n_units as f64 * pct / 100.0).round() as usize).clamp(1, n_units - 1);
            (2, Box::new(move |pos| usize::from(pos >= train_units)))
        }
        SplitScheme::Predefined { .. } => unreachable!("handled above"),
    };

    let assignment: Vec<usize> =
        unit_of_record.iter().map(|&u| fold_of_rank(rank[u])).collect();
    Ok(SplitSpec { n_folds, assignment, group_key: group_key.map(str::to_string) })
}
