//! Scoring: patch aggregation, stream fusion, accuracy, confusion
//! matrices, respiratory-task metrics, hierarchical composite scores,
//! early-classification curves, and report rendering.
//!
//! The pipeline shape is: per-patch probabilities → [`aggregate_patches`]
//! (or [`fuse`] across several front-ends) → [`predict_label`] →
//! [`ConfusionMatrix`] → task metrics → [`MetricsReport`] files. All
//! internal math runs at full precision; [`report`](crate::eval::report)
//! rounds only when printing.

mod aggregate;
mod confusion;
mod early;
mod hierarchy_eval;
mod icbhi;
pub mod report;

pub use aggregate::{accuracy, aggregate_patches, fuse, predict_label, FuseMode};
pub use confusion::ConfusionMatrix;
pub use early::{early_curve, EarlyPoint};
pub use hierarchy_eval::{evaluate_hierarchy, HierarchyScore};
pub use icbhi::{icbhi_metrics, IcbhiMetrics, IcbhiTask};
pub use report::{
    build_report, format_fixed, round_half_up, ClassScore, EvalRecord, GroupScore, MetricsReport,
};
