use std::io::Write;

use super::metrics::{require_both_classes, tie_groups, ScoredExample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub threshold: f64,
    pub x: f64,
    pub y: f64,
}

/// Precision-recall `(recall, precision)` and ROC `(fpr, tpr)` points, one per
/// distinct score in descending threshold order. ROC additionally starts at
/// `(0, 0)` with threshold `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct Curves {
    pub pr: Vec<CurvePoint>,
    pub roc: Vec<CurvePoint>,
}

pub fn curves(scored: &[ScoredExample]) -> Result<Curves> {
    let (pos, neg) = require_both_classes(scored, "curves")?;
    let groups = tie_groups(scored)?;
    let mut pr = Vec::with_capacity(groups.len());
    let mut roc = Vec::with_capacity(groups.len() + 1);
    roc.push(CurvePoint {
        threshold: f64::INFINITY,
        x: 0.0,
        y: 0.0,
    });
    let (mut tp, mut fp) = (0u64, 0u64);
    for g in &groups {
        tp += g.pos;
        fp += g.neg;
        let recall = tp as f64 / pos as f64;
        pr.push(CurvePoint {
            threshold: g.score,
            x: recall,
            y: tp as f64 / (tp + fp) as f64,
        });
        roc.push(CurvePoint {
            threshold: g.score,
            x: fp as f64 / neg as f64,
            y: recall,
        });
    }
    Ok(Curves { pr, roc })
}

/// Area under a piecewise-linear curve given in any x-monotone order.
pub fn trapezoid_area(points: &[CurvePoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].x - w[0].x) * (w[0].y + w[1].y) / 2.0)
        .sum::<f64>()
        .abs()
}

/// CSV with header `threshold,x,y`.
pub fn write_curve_csv<W: Write>(out: W, points: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Data(format!("writing curve: {e}"));
    w.write_record(["threshold", "x", "y"]).map_err(io)?;
    for p in points {
        w.write_record([p.threshold.to_string(), p.x.to_string(), p.y.to_string()])
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Data(format!("writing curve: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::auc_roc;

    fn scored(pairs: &[(bool, f64)]) -> Vec<ScoredExample> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, &(l, s))| ScoredExample::new(i.to_string(), s, l))
            .collect()
    }

    #[test]
    fn perfect_roc_visits_top_left() {
        let c = curves(&scored(&[(true, 0.9), (true, 0.8), (false, 0.2)])).unwrap();
        assert!(c.roc.iter().any(|p| p.x == 0.0 && p.y == 1.0));
        let last = c.roc.last().unwrap();
        assert_eq!((last.x, last.y), (1.0, 1.0));
        assert_eq!(trapezoid_area(&c.roc), 1.0);
    }

    #[test]
    fn tied_scores_make_one_point() {
        let s = scored(&[(true, 0.5), (false, 0.5), (true, 0.1), (false, 0.7)]);
        let c = curves(&s).unwrap();
        assert_eq!(c.pr.len(), 3);
        assert_eq!(c.roc.len(), 4);
        assert!((trapezoid_area(&c.roc) - auc_roc(&s).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn csv_header() {
        let c = curves(&scored(&[(true, 0.9), (false, 0.2)])).unwrap();
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &c.roc).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("threshold,x,y\ninf,0,0\n"), "{text}");
    }
}
