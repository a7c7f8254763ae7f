use std::fmt::Write as _;

use super::curves::{curves, Curves};
use super::metrics::{auc_roc, balanced_accuracy, f_scores, ScoredExample};
use crate::error::{Error, Result};

/// Decision threshold used for `f1_at_half` and the accuracy column.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub f1_at_half: f64,
    pub max_f1: f64,
    pub best_threshold: f64,
    pub auc: f64,
    /// Percent.
    pub balanced_accuracy: f64,
    pub curves: Curves,
}

pub fn evaluate(scored: &[ScoredExample]) -> Result<EvalReport> {
    let f = f_scores(scored)?;
    Ok(EvalReport {
        f1_at_half: f.f1_at_half,
        max_f1: f.max_f1,
        best_threshold: f.best_threshold,
        auc: auc_roc(scored)?,
        balanced_accuracy: balanced_accuracy(scored, DECISION_THRESHOLD)?,
        curves: curves(scored)?,
    })
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub model: String,
    /// Inputs used, e.g. `TT,IT,I`, or `-`.
    pub inputs: String,
    pub f: f64,
    pub auc: f64,
    pub acc: f64,
}

impl ResultRow {
    pub fn from_report(model: impl Into<String>, inputs: impl Into<String>, report: &EvalReport) -> Self {
        Self {
            model: model.into(),
            inputs: inputs.into(),
            f: report.max_f1,
            auc: report.auc,
            acc: report.balanced_accuracy,
        }
    }

    fn cells(&self) -> [String; 5] {
        [
            self.model.clone(),
            self.inputs.clone(),
            format!("{:.3}", self.f),
            format!("{:.3}", self.auc),
            format!("{:.1}", self.acc),
        ]
    }
}

pub const TABLE_HEADER: [&str; 5] = ["model", "inputs", "F", "AUC", "ACC"];

/// Rows of `(model, inputs, F, AUC, ACC)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
}

pub fn results_table(rows: Vec<ResultRow>) -> Result<ResultsTable> {
    if rows.is_empty() {
        return Err(Error::Data("results table needs at least one row".into()));
    }
    if rows.iter().any(|r| r.model.trim().is_empty()) {
        return Err(Error::Data("results table row with empty model name".into()));
    }
    Ok(ResultsTable { rows })
}

impl ResultsTable {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(TABLE_HEADER).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.cells()).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }

    /// Space-aligned rendering; text columns left, numbers right.
    pub fn to_text(&self) -> String {
        let cells: Vec<[String; 5]> = self.rows.iter().map(ResultRow::cells).collect();
        let mut width = TABLE_HEADER.map(str::len);
        for row in &cells {
            for (w, c) in width.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let header = TABLE_HEADER.map(String::from);
        for row in std::iter::once(&header).chain(&cells) {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    if i < 2 {
                        format!("{c:<w$}", w = width[i])
                    } else {
                        format!("{c:>w$}", w = width[i])
                    }
                })
                .collect();
            writeln!(out, "{}", line.join("  ").trim_end()).expect("string write");
        }
        out
    }
}
