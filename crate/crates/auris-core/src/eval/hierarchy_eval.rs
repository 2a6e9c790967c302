//! Scoring for the two-level hierarchical classifier.
//!
//! A sample counts as correct only when both levels agree with the truth:
//! the predicted group must be the true label's group AND the predicted
//! fine label must be the true label. The meta level's own accuracy is
//! reported alongside; the composite can never exceed it.

use crate::error::{Error, Result};
use crate::models::HierarchySpec;

/// Accuracy of a hierarchical run, both levels in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HierarchyScore {
    /// Share of samples whose coarse group was right.
    pub meta_accuracy: f64,
    /// Share of samples right at both levels.
    pub composite_accuracy: f64,
}

/// Scores aligned per-sample predictions against global fine-label truths.
/// `meta_preds` hold group indices, `fine_preds` and `truths` hold global
/// fine-label indices in the spec's flattened order.
pub fn evaluate_hierarchy(
    spec: &HierarchySpec,
    meta_preds: &[usize],
    fine_preds: &[usize],
    truths: &[usize],
) -> Result<HierarchyScore> {
    let n = truths.len();
    if meta_preds.len() != n || fine_preds.len() != n {
        return Err(Error::Shape(format!(
            "prediction lists are misaligned: {} meta, {} fine, {n} truths",
            meta_preds.len(),
            fine_preds.len()
        )));
    }
    if n == 0 {
        return Err(Error::Input("cannot score an empty prediction list".into()));
    }
    let fine_count = spec.fine_labels().len();
    let group_count = spec.group_count();
    let group_of = |global: usize| -> Result<usize> {
        (0..group_count)
            .find(|&g| spec.group_span(g).contains(&global))
            .ok_or_else(|| {
                Error::Range(format!(
                    "fine label index {global} outside the hierarchy's {fine_count} labels"
                ))
            })
    };

    let mut meta_right = 0usize;
    let mut both_right = 0usize;
    for ((&m, &f), &t) in meta_preds.iter().zip(fine_preds).zip(truths) {
        if m >= group_count {
            return Err(Error::Range(format!(
                "group index {m} outside the hierarchy's {group_count} groups"
            )));
        }
        if f >= fine_count {
            return Err(Error::Range(format!(
                "fine label index {f} outside the hierarchy's {fine_count} labels"
            )));
        }
        let true_group = group_of(t)?;
        if m == true_group {
            meta_right += 1;
            if f == t {
                both_right += 1;
            }
        }
    }
    Ok(HierarchyScore {
        meta_accuracy: 100.0 * meta_right as f64 / n as f64,
        composite_accuracy: 100.0 * both_right as f64 / n as f64,
    })
}
