//! Metrics (max-F, ROC AUC, balanced accuracy), precision-recall and ROC
//! curves, and comparison tables.

mod curves;
mod metrics;
mod report;
mod score;

pub use curves::{curves, trapezoid_area, write_curve_csv, CurvePoint, Curves};
pub use metrics::{auc_roc, balanced_accuracy, f1_at, f_scores, FScores, ScoredExample};
pub use report::{evaluate, results_table, EvalReport, ResultRow, ResultsTable, DECISION_THRESHOLD, TABLE_HEADER};
pub use score::{random_scores, score_dataset};
