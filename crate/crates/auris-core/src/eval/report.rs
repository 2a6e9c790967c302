//! Presentation of evaluation results: tables, CSVs, and a text summary.
//!
//! Everything upstream works at full precision; rounding happens only
//! here, half-up at a fixed number of decimals (1 for accuracy percent,
//! 2 for the respiratory-task metrics).

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::eval::aggregate::predict_label;
use crate::eval::confusion::ConfusionMatrix;
use crate::eval::icbhi::{icbhi_metrics, IcbhiMetrics, IcbhiTask};

/// Rounds half-up (ties away from zero) at `decimals` places.
///
/// Values that are a whisker below a decimal tie only because of binary
/// representation error — e.g. `(0.86 + 0.95) / 2` computing a few ulps
/// under 0.905 — are treated as sitting on the tie: a relative guard of a
/// few ulps is added before taking the floor. Genuine sub-tie values are
/// orders of magnitude further away and are unaffected.
pub fn round_half_up(value: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    let y = value.abs() * scale;
    let guard = y * f64::EPSILON * 8.0;
    let rounded = (y + 0.5 + guard).floor() / scale;
    if value.is_sign_negative() {
        -rounded
    } else {
        rounded
    }
}

/// Formats `value` rounded half-up with exactly `decimals` places.
pub fn format_fixed(value: f64, decimals: u32) -> String {
    format!("{:.*}", decimals as usize, round_half_up(value, decimals))
}

/// One scored clip (or breathing cycle): its identifier, ground truth,
/// aggregated class probabilities, and free-form metadata used for
/// grouped breakdowns (device, location, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub clip_id: String,
    pub truth: usize,
    pub probs: Vec<f32>,
    pub meta: BTreeMap<String, String>,
}

/// Accuracy of one class (recall): `None` when the class never occurs.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassScore {
    pub label: String,
    pub accuracy: Option<f64>,
    pub total: usize,
}

/// Accuracy over the records sharing one metadata value.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupScore {
    pub key: String,
    pub value: String,
    pub accuracy: f64,
    pub total: usize,
}

/// Full evaluation report; all numbers at full precision.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassScore>,
    pub groups: Vec<GroupScore>,
    pub icbhi: Option<IcbhiMetrics>,
}

/// Scores a set of records: overall and per-class accuracy, optional
/// grouped breakdowns over the given metadata keys, the confusion matrix,
/// and — when a respiratory task is named — its sensitivity, specificity,
/// and score.
pub fn build_report(
    records: &[EvalRecord],
    labels: &[String],
    group_keys: &[&str],
    icbhi_task: Option<IcbhiTask>,
) -> Result<MetricsReport> {
    if records.is_empty() {
        return Err(Error::Input("no records to report on".into()));
    }
    let classes = labels.len();
    let mut predicted = Vec::with_capacity(records.len());
    let mut truths = Vec::with_capacity(records.len());
    for r in records {
        if r.probs.len() != classes {
            return Err(Error::Shape(format!(
                "clip `{}` carries {} probabilities for {} classes",
                r.clip_id,
                r.probs.len(),
                classes
            )));
        }
        predicted.push(predict_label(&r.probs));
        truths.push(r.truth);
    }
    let confusion = ConfusionMatrix::from_pairs(labels.to_vec(), &predicted, &truths)?;
    let accuracy = confusion.accuracy()?;
    let per_class = confusion
        .per_class_accuracy()
        .into_iter()
        .zip(labels)
        .enumerate()
        .map(|(cls, (acc, label))| ClassScore {
            label: label.clone(),
            accuracy: acc,
            total: confusion.column_total(cls),
        })
        .collect();

    let mut groups = Vec::new();
    for &key in group_keys {
        let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for (r, (&p, &t)) in records.iter().zip(predicted.iter().zip(truths.iter())) {
            let value = r.meta.get(key).ok_or_else(|| {
                Error::Config(format!("clip `{}` lacks metadata key `{key}`", r.clip_id))
            })?;
            let cell = tally.entry(value).or_insert((0, 0));
            cell.0 += usize::from(p == t);
            cell.1 += 1;
        }
        for (value, (correct, total)) in tally {
            groups.push(GroupScore {
                key: key.to_string(),
                value: value.to_string(),
                accuracy: super::aggregate::accuracy(correct, total)?,
                total,
            });
        }
    }

    let icbhi = match icbhi_task {
        Some(task) => Some(icbhi_metrics(&confusion, task)?),
        None => None,
    };
    Ok(MetricsReport { accuracy, confusion, per_class, groups, icbhi })
}

impl MetricsReport {
    /// `metric,value` rows: accuracies at one decimal (percent), the
    /// respiratory metrics at two (fractions). Undefined per-class rows
    /// render `n/a`.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        out.push_str(&format!("accuracy,{}\n", format_fixed(self.accuracy, 1)));
        for c in &self.per_class {
            let shown = match c.accuracy {
                Some(a) => format_fixed(a, 1),
                None => "n/a".to_string(),
            };
            out.push_str(&format!("accuracy[{}],{shown}\n", c.label));
        }
        for g in &self.groups {
            out.push_str(&format!(
                "accuracy[{}={}],{}\n",
                g.key,
                g.value,
                format_fixed(g.accuracy, 1)
            ));
        }
        if let Some(m) = &self.icbhi {
            out.push_str(&format!("sensitivity,{}\n", format_fixed(m.sensitivity, 2)));
            out.push_str(&format!("specificity,{}\n", format_fixed(m.specificity, 2)));
            out.push_str(&format!("icbhi_score,{}\n", format_fixed(m.score, 2)));
        }
        out
    }

    /// Human-readable summary.
    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "overall accuracy: {}% ({}/{} correct)\n",
            format_fixed(self.accuracy, 1),
            self.confusion.correct(),
            self.confusion.total()
        ));
        out.push_str("per class:\n");
        for c in &self.per_class {
            match c.accuracy {
                Some(a) => out.push_str(&format!(
                    "  {:<16} {:>6}%  ({} samples)\n",
                    c.label,
                    format_fixed(a, 1),
                    c.total
                )),
                None => out.push_str(&format!("  {:<16}    n/a  (0 samples)\n", c.label)),
            }
        }
        if !self.groups.is_empty() {
            out.push_str("by group:\n");
            for g in &self.groups {
                out.push_str(&format!(
                    "  {}={:<12} {:>6}%  ({} samples)\n",
                    g.key,
                    g.value,
                    format_fixed(g.accuracy, 1),
                    g.total
                ));
            }
        }
        if let Some(m) = &self.icbhi {
            out.push_str(&format!(
                "sensitivity {} / specificity {} / score {}\n",
                format_fixed(m.sensitivity, 2),
                format_fixed(m.specificity, 2),
                format_fixed(m.score, 2)
            ));
        }
        out
    }
}
