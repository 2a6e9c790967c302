//! Sensitivity, specificity, and the ICBHI score.
//!
//! All four scoring variants share one convention: the confusion matrix
//! orders the unhealthy classes first and keeps the healthy/normal class
//! LAST. The cycle tasks run on 4×4 matrices (three anomaly classes +
//! normal), the recording tasks on 3×3 matrices (two disease classes +
//! healthy). Sensitivity looks only at the unhealthy columns — either
//! exact-class hits (multi-class variants) or any-unhealthy-as-unhealthy
//! hits (binary variants) — specificity is the healthy column's diagonal
//! share, and the score is always the plain mean of the two.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::eval::confusion::ConfusionMatrix;

/// The four ICBHI scoring variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcbhiTask {
    /// Cycle-level, each anomaly class must be hit exactly (code `1-1`).
    AnomalyMulti,
    /// Cycle-level, any anomaly counted as anomaly (code `1-2`).
    AnomalyBinary,
    /// Recording-level, each disease class must be hit exactly (code `2-1`).
    DiseaseMulti,
    /// Recording-level, any disease counted as disease (code `2-2`).
    DiseaseBinary,
}

impl IcbhiTask {
    /// Confusion-matrix side length the task expects.
    pub fn class_count(self) -> usize {
        match self {
            IcbhiTask::AnomalyMulti | IcbhiTask::AnomalyBinary => 4,
            IcbhiTask::DiseaseMulti | IcbhiTask::DiseaseBinary => 3,
        }
    }

    /// True when any unhealthy class predicted as any unhealthy class
    /// counts as a hit.
    fn binary(self) -> bool {
        matches!(self, IcbhiTask::AnomalyBinary | IcbhiTask::DiseaseBinary)
    }

    /// The challenge's short code for the task.
    pub fn code(self) -> &'static str {
        match self {
            IcbhiTask::AnomalyMulti => "1-1",
            IcbhiTask::AnomalyBinary => "1-2",
            IcbhiTask::DiseaseMulti => "2-1",
            IcbhiTask::DiseaseBinary => "2-2",
        }
    }
}

impl FromStr for IcbhiTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1-1" => Ok(IcbhiTask::AnomalyMulti),
            "1-2" => Ok(IcbhiTask::AnomalyBinary),
            "2-1" => Ok(IcbhiTask::DiseaseMulti),
            "2-2" => Ok(IcbhiTask::DiseaseBinary),
            other => Err(Error::Config(format!(
                "unknown scoring task `{other}` (expected 1-1, 1-2, 2-1 or 2-2)"
            ))),
        }
    }
}

/// The three ICBHI metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcbhiMetrics {
    pub sensitivity: f64,
    pub specificity: f64,
    /// Always `(sensitivity + specificity) / 2`.
    pub score: f64,
}

/// Scores a confusion matrix under the given task. Every class must have
/// at least one true sample; otherwise the metric is undefined and the
/// offending class is named.
pub fn icbhi_metrics(cm: &ConfusionMatrix, task: IcbhiTask) -> Result<IcbhiMetrics> {
    let c = task.class_count();
    if cm.class_count() != c {
        return Err(Error::Shape(format!(
            "task {} scores a {c}×{c} matrix, got {}×{}",
            task.code(),
            cm.class_count(),
            cm.class_count()
        )));
    }
    for cls in 0..c {
        if cm.column_total(cls) == 0 {
            return Err(Error::UndefinedMetric { class: cm.labels()[cls].clone() });
        }
    }
    let healthy = c - 1;
    let sick = 0..healthy;

    let sick_total: usize = sick.clone().map(|t| cm.column_total(t)).sum();
    let hits: usize = if task.binary() {
        sick.clone().flat_map(|t| sick.clone().map(move |p| (p, t))).map(|(p, t)| cm.count(p, t)).sum()
    } else {
        sick.clone().map(|t| cm.count(t, t)).sum()
    };

    let sensitivity = hits as f64 / sick_total as f64;
    let specificity = cm.count(healthy, healthy) as f64 / cm.column_total(healthy) as f64;
    Ok(IcbhiMetrics {
        sensitivity,
        specificity,
        score: 0.5 * (specificity + sensitivity),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const ANOMALY: [&str; 4] = ["crackle", "wheeze", "both", "normal"];
    const DISEASE: [&str; 3] = ["chronic", "non-chronic", "healthy"];

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn diagonal(names: &[&str], per_class: usize) -> ConfusionMatrix {
        let mut cm = ConfusionMatrix::new(labels(names)).unwrap();
        for cls in 0..names.len() {
            for _ in 0..per_class {
                cm.record(cls, cls).unwrap();
            }
        }
        cm
    }

    #[test]
    fn a_diagonal_matrix_scores_one_on_every_task() {
        for task in [IcbhiTask::AnomalyMulti, IcbhiTask::AnomalyBinary] {
            let m = icbhi_metrics(&diagonal(&ANOMALY, 3), task).unwrap();
            assert_eq!((m.sensitivity, m.specificity, m.score), (1.0, 1.0, 1.0));
        }
        for task in [IcbhiTask::DiseaseMulti, IcbhiTask::DiseaseBinary] {
            let m = icbhi_metrics(&diagonal(&DISEASE, 3), task).unwrap();
            assert_eq!((m.sensitivity, m.specificity, m.score), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn the_score_is_the_mean_of_ratios_of_counts() {
        // 19 of 20 unhealthy recordings hit exactly, 43 of 50 healthy kept:
        // sensitivity 0.95, specificity 0.86, score 0.905.
        let mut cm = ConfusionMatrix::new(labels(&DISEASE)).unwrap();
        for _ in 0..10 {
            cm.record(0, 0).unwrap();
        }
        for _ in 0..9 {
            cm.record(1, 1).unwrap();
        }
        cm.record(0, 1).unwrap();
        for _ in 0..43 {
            cm.record(2, 2).unwrap();
        }
        for _ in 0..7 {
            cm.record(0, 2).unwrap();
        }
        let m = icbhi_metrics(&cm, IcbhiTask::DiseaseMulti).unwrap();
        assert!((m.sensitivity - 0.95).abs() < 1e-12);
        assert!((m.specificity - 0.86).abs() < 1e-12);
        assert!((m.score - 0.905).abs() < 1e-12);
    }

    #[test]
    fn the_binary_variant_forgives_confusion_between_unhealthy_classes() {
        // Every crackle cycle called wheeze; other classes clean.
        let mut cm = ConfusionMatrix::new(labels(&ANOMALY)).unwrap();
        for _ in 0..5 {
            cm.record(1, 0).unwrap();
        }
        for _ in 0..3 {
            cm.record(1, 1).unwrap();
        }
        for _ in 0..2 {
            cm.record(2, 2).unwrap();
        }
        for _ in 0..4 {
            cm.record(3, 3).unwrap();
        }
        let multi = icbhi_metrics(&cm, IcbhiTask::AnomalyMulti).unwrap();
        let binary = icbhi_metrics(&cm, IcbhiTask::AnomalyBinary).unwrap();
        assert!((multi.sensitivity - 0.5).abs() < 1e-12);
        assert!((binary.sensitivity - 1.0).abs() < 1e-12);
        assert_eq!(multi.specificity, binary.specificity);
        assert!(binary.score > multi.score);
    }

    #[test]
    fn relabeling_the_unhealthy_classes_consistently_changes_nothing() {
        let mut cm = ConfusionMatrix::new(labels(&ANOMALY)).unwrap();
        let decisions = [
            (0, 0, 4),
            (1, 0, 2),
            (1, 1, 5),
            (2, 1, 1),
            (2, 2, 3),
            (0, 2, 2),
            (3, 3, 6),
            (1, 3, 1),
        ];
        for &(p, t, n) in &decisions {
            for _ in 0..n {
                cm.record(p, t).unwrap();
            }
        }
        // Cycle the three unhealthy classes (healthy must stay last).
        let perm = [1usize, 2, 0, 3];
        let mut relabeled = ConfusionMatrix::new(labels(&ANOMALY)).unwrap();
        for &(p, t, n) in &decisions {
            for _ in 0..n {
                relabeled.record(perm[p], perm[t]).unwrap();
            }
        }
        for task in [IcbhiTask::AnomalyMulti, IcbhiTask::AnomalyBinary] {
            let a = icbhi_metrics(&cm, task).unwrap();
            let b = icbhi_metrics(&relabeled, task).unwrap();
            assert_eq!(a, b, "task {} moved under relabeling", task.code());
        }
    }

    #[test]
    fn an_empty_truth_column_names_the_class() {
        let mut cm = ConfusionMatrix::new(labels(&DISEASE)).unwrap();
        cm.record(0, 0).unwrap();
        cm.record(2, 2).unwrap();
        let err = icbhi_metrics(&cm, IcbhiTask::DiseaseMulti).unwrap_err();
        match err {
            Error::UndefinedMetric { class } => assert_eq!(class, "non-chronic"),
            other => panic!("expected an undefined-metric error, got {other}"),
        }
    }

    #[test]
    fn task_codes_round_trip() {
        for task in [
            IcbhiTask::AnomalyMulti,
            IcbhiTask::AnomalyBinary,
            IcbhiTask::DiseaseMulti,
            IcbhiTask::DiseaseBinary,
        ] {
            assert_eq!(task.code().parse::<IcbhiTask>().unwrap(), task);
        }
        assert!("3-1".parse::<IcbhiTask>().is_err());
        assert_eq!(IcbhiTask::AnomalyMulti.class_count(), 4);
        assert_eq!(IcbhiTask::DiseaseBinary.class_count(), 3);
    }

    #[test]
    fn wrong_matrix_size_is_rejected() {
        let cm = diagonal(&DISEASE, 2);
        assert!(icbhi_metrics(&cm, IcbhiTask::AnomalyMulti).is_err());
    }
}
