use crate::error::{Error, Result};

/// Classifier output for one example.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredExample {
    pub id: String,
    /// Probability of the hate class.
    pub score: f64,
    pub label: bool,
}

impl ScoredExample {
    pub fn new(id: impl Into<String>, score: f64, label: bool) -> Self {
        Self {
            id: id.into(),
            score,
            label,
        }
    }
}

/// Counts of positives and negatives sharing one score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct TieGroup {
    pub score: f64,
    pub pos: u64,
    pub neg: u64,
}

/// Tie groups in descending score order.
pub(crate) fn tie_groups(scored: &[ScoredExample]) -> Result<Vec<TieGroup>> {
    if let Some(e) = scored.iter().find(|e| !e.score.is_finite()) {
        return Err(Error::Metric(format!("score of `{}` is not finite", e.id)));
    }
    let mut sorted: Vec<(f64, bool)> = scored.iter().map(|e| (e.score, e.label)).collect();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut groups: Vec<TieGroup> = Vec::new();
    for (score, label) in sorted {
        match groups.last_mut() {
            Some(g) if g.score == score => {}
            _ => groups.push(TieGroup { score, pos: 0, neg: 0 }),
        }
        let g = groups.last_mut().expect("group just ensured");
        if label {
            g.pos += 1;
        } else {
            g.neg += 1;
        }
    }
    Ok(groups)
}

pub(crate) fn class_totals(scored: &[ScoredExample]) -> (u64, u64) {
    let pos = scored.iter().filter(|e| e.label).count() as u64;
    (pos, scored.len() as u64 - pos)
}

pub(crate) fn require_both_classes(scored: &[ScoredExample], what: &str) -> Result<(u64, u64)> {
    let (pos, neg) = class_totals(scored);
    if pos == 0 || neg == 0 {
        return Err(Error::Metric(format!(
            "{what} needs both classes, got {pos} positive and {neg} negative"
        )));
    }
    Ok((pos, neg))
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn auc_roc(scored: &[ScoredExample]) -> Result<f64> {
    let (pos, neg) = require_both_classes(scored, "auc_roc")?;
    let groups = tie_groups(scored)?;
    // twice the pair statistic, kept integral
    let mut twice: u128 = 0;
    let mut neg_below = neg;
    for g in &groups {
        neg_below -= g.neg;
        twice += u128::from(g.pos) * (2 * u128::from(neg_below) + u128::from(g.neg));
    }
    Ok(twice as f64 / (2.0 * pos as f64 * neg as f64))
}

/// F1 of the hate class at a fixed threshold and at the best threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FScores {
    pub f1_at_half: f64,
    pub max_f1: f64,
    /// Examples scoring at least this are predicted hate. `+inf` when no
    /// threshold beats predicting nothing.
    pub best_threshold: f64,
}

fn f1(tp: u64, fp: u64, positives: u64) -> f64 {
    if tp == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (tp + fp + positives) as f64
    }
}

/// F1 when predicting hate for `score >= threshold`.
pub fn f1_at(scored: &[ScoredExample], threshold: f64) -> f64 {
    let (positives, _) = class_totals(scored);
    let tp = scored.iter().filter(|e| e.label && e.score >= threshold).count() as u64;
    let fp = scored.iter().filter(|e| !e.label && e.score >= threshold).count() as u64;
    f1(tp, fp, positives)
}

/// `max_f1` sweeps every distinct score as a threshold plus both infinities.
pub fn f_scores(scored: &[ScoredExample]) -> Result<FScores> {
    let (positives, _) = class_totals(scored);
    if positives == 0 {
        return Err(Error::Metric("f_scores needs at least one positive".into()));
    }
    let groups = tie_groups(scored)?;
    let (mut best, mut best_threshold) = (0.0, f64::INFINITY);
    let (mut tp, mut fp) = (0, 0);
    for g in &groups {
        tp += g.pos;
        fp += g.neg;
        let f = f1(tp, fp, positives);
        if f > best {
            best = f;
            best_threshold = g.score;
        }
    }
    Ok(FScores {
        f1_at_half: f1_at(scored, 0.5),
        max_f1: best,
        best_threshold,
    })
}

/// Mean per-class recall at `threshold`, in percent.
pub fn balanced_accuracy(scored: &[ScoredExample], threshold: f64) -> Result<f64> {
    let (pos, neg) = require_both_classes(scored, "balanced_accuracy")?;
    let tp = scored.iter().filter(|e| e.label && e.score >= threshold).count();
    let tn = scored.iter().filter(|e| !e.label && e.score < threshold).count();
    Ok(50.0 * (tp as f64 / pos as f64 + tn as f64 / neg as f64))
}
