//! Labelled confusion matrices.
//!
//! Layout convention throughout the crate: **rows are predicted classes,
//! columns are ground-truth classes**, so a column total is the number of
//! true samples of that class and the diagonal counts correct decisions.

use crate::error::{Error, Result};

/// A C×C count matrix with class labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    /// Row-major counts, `counts[predicted · C + truth]`.
    counts: Vec<usize>,
}

impl ConfusionMatrix {
    /// An empty matrix over the given class labels.
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::Config(format!(
                "a confusion matrix needs at least 2 classes, got {}",
                labels.len()
            )));
        }
        let c = labels.len();
        Ok(ConfusionMatrix { labels, counts: vec![0; c * c] })
    }

    /// Builds a matrix from aligned prediction/truth index lists.
    pub fn from_pairs(
        labels: Vec<String>,
        predicted: &[usize],
        truth: &[usize],
    ) -> Result<Self> {
        if predicted.len() != truth.len() {
            return Err(Error::Shape(format!(
                "{} predictions for {} truths",
                predicted.len(),
                truth.len()
            )));
        }
        let mut cm = ConfusionMatrix::new(labels)?;
        for (&p, &t) in predicted.iter().zip(truth.iter()) {
            cm.record(p, t)?;
        }
        Ok(cm)
    }

    /// Counts one decision.
    pub fn record(&mut self, predicted: usize, truth: usize) -> Result<()> {
        let c = self.class_count();
        if predicted >= c || truth >= c {
            return Err(Error::Range(format!(
                "class pair ({predicted}, {truth}) outside {c} classes"
            )));
        }
        self.counts[predicted * c + truth] += 1;
        Ok(())
    }

    pub fn class_count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Count of true-`truth` samples predicted as `predicted`.
    pub fn count(&self, predicted: usize, truth: usize) -> usize {
        self.counts[predicted * self.class_count() + truth]
    }

    /// Number of true samples of class `truth`.
    pub fn column_total(&self, truth: usize) -> usize {
        (0..self.class_count()).map(|p| self.count(p, truth)).sum()
    }

    /// Number of samples predicted as class `predicted`.
    pub fn row_total(&self, predicted: usize) -> usize {
        (0..self.class_count()).map(|t| self.count(predicted, t)).sum()
    }

    /// All recorded samples.
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Correct decisions (the diagonal).
    pub fn correct(&self) -> usize {
        (0..self.class_count()).map(|i| self.count(i, i)).sum()
    }

    /// Overall accuracy in percent.
    pub fn accuracy(&self) -> Result<f64> {
        super::aggregate::accuracy(self.correct(), self.total())
    }

    /// Per-class accuracy (recall) in percent, `None` for classes with no
    /// true samples.
    pub fn per_class_accuracy(&self) -> Vec<Option<f64>> {
        (0..self.class_count())
            .map(|cls| {
                let total = self.column_total(cls);
                (total > 0).then(|| 100.0 * self.count(cls, cls) as f64 / total as f64)
            })
            .collect()
    }

    /// CSV rendering: header row of truth labels, one row per predicted
    /// class, and a closing column-total row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("predicted\\truth");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (p, label) in self.labels.iter().enumerate() {
            out.push_str(label);
            for t in 0..self.class_count() {
                out.push_str(&format!(",{}", self.count(p, t)));
            }
            out.push('\n');
        }
        out.push_str("total");
        for t in 0..self.class_count() {
            out.push_str(&format!(",{}", self.column_total(t)));
        }
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn counts_land_in_the_predicted_row_and_truth_column() {
        let mut cm = ConfusionMatrix::new(labels(&["a", "b", "c"])).unwrap();
        cm.record(1, 0).unwrap(); // a true sample of `a`, called `b`
        cm.record(1, 0).unwrap();
        cm.record(2, 2).unwrap();
        assert_eq!(cm.count(1, 0), 2);
        assert_eq!(cm.count(0, 1), 0);
        assert_eq!(cm.column_total(0), 2);
        assert_eq!(cm.row_total(1), 2);
        assert_eq!(cm.correct(), 1);
        assert_eq!(cm.total(), 3);
    }

    #[test]
    fn pair_construction_checks_alignment_and_bounds() {
        assert!(ConfusionMatrix::from_pairs(labels(&["a", "b"]), &[0, 1], &[0]).is_err());
        assert!(ConfusionMatrix::from_pairs(labels(&["a", "b"]), &[0, 2], &[0, 1]).is_err());
        let cm =
            ConfusionMatrix::from_pairs(labels(&["a", "b"]), &[0, 1, 1], &[0, 1, 0]).unwrap();
        assert_eq!(cm.accuracy().unwrap(), 100.0 * 2.0 / 3.0);
        assert_eq!(cm.per_class_accuracy(), vec![Some(50.0), Some(100.0)]);
    }

    #[test]
    fn csv_reconciles_rows_columns_and_total() {
        let cm = ConfusionMatrix::from_pairs(
            labels(&["x", "y"]),
            &[0, 0, 1, 1, 0],
            &[0, 1, 1, 0, 0],
        )
        .unwrap();
        let csv = cm.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "predicted\\truth,x,y");
        assert_eq!(lines[1], "x,2,1");
        assert_eq!(lines[2], "y,1,1");
        assert_eq!(lines[3], "total,3,2");
        let col_sum: usize = (0..2).map(|t| cm.column_total(t)).sum();
        let row_sum: usize = (0..2).map(|p| cm.row_total(p)).sum();
        assert_eq!(col_sum, cm.total());
        assert_eq!(row_sum, cm.total());
    }
}
