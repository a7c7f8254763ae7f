//! Finite-difference verification of reverse-mode gradients.
//!
//! Central differences are invalid when a step moves some relu input across
//! zero. Such probes are detected through [`Graph::activation_pattern`] and
//! replaced by a second-order one-sided stencil on the side that stays on the
//! same smooth piece, or by a shorter step when both sides cross.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, NodeId};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

/// Dropout masks are drawn from this seed on every rebuild, so perturbed
/// evaluations see the same mask as the analytic pass.
const GRAPH_SEED: u64 = 0x6772_6164;

const DENOMINATOR_FLOOR: f64 = 1e-8;

/// Step shortenings tried when both sides of a probe cross a kink.
const MAX_STEP_REDUCTIONS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// (input index, flat coordinate) of the worst disagreement.
    pub worst: Option<(usize, usize)>,
    pub analytic: f64,
    pub numeric: f64,
    pub coords_checked: usize,
    /// Coordinates whose central difference crossed a relu kink.
    pub kinks_avoided: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error <= tolerance
    }
}

/// Max over all input coordinates of
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
///
/// `numeric` is the central difference with step `eps` unless that crosses
/// a relu kink (see the module docs).
pub fn check_gradients<F>(f: F, inputs: &[Tensor], eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    check_gradients_report(f, inputs, eps, None).map(|r| r.max_rel_error)
}

/// Like [`check_gradients`], but may restrict each input to a seeded sample of
/// at most `per_input` coordinates (used for large parameter tensors).
pub fn check_gradients_report<F>(
    f: F,
    inputs: &[Tensor],
    eps: f64,
    sampling: Option<(usize, u64)>,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::Config(format!("eps must be positive, got {eps}")));
    }
    if inputs.iter().any(|t| !t.all_finite()) {
        return Err(Error::Numeric("gradient check inputs must be finite".into()));
    }

    let mut g = Graph::new(GRAPH_SEED);
    let ids: Vec<NodeId> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let out = f(&mut g, &ids)?;
    if !g.value(out).is_scalar() {
        return Err(Error::shape(
            "check_gradients",
            format!("function output must be scalar, got {:?}", g.value(out).shape()),
        ));
    }
    let base_value = g.value(out).item();
    let base_pattern = g.activation_pattern();
    g.backward(out)?;
    let analytic: Vec<Tensor> = ids
        .iter()
        .map(|&id| g.grad(id).cloned().expect("leaf gradients are filled"))
        .collect();

    let eval = |perturbed: &[Tensor]| -> Result<(f64, bool)> {
        let mut g = Graph::new(GRAPH_SEED);
        let ids: Vec<NodeId> = perturbed.iter().map(|t| g.constant(t.clone())).collect();
        let out = f(&mut g, &ids)?;
        Ok((g.value(out).item(), g.activation_pattern() == base_pattern))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(sampling.map_or(0, |(_, s)| s));
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        analytic: 0.0,
        numeric: 0.0,
        coords_checked: 0,
        kinks_avoided: 0,
    };
    let mut work: Vec<Tensor> = inputs.to_vec();
    for i in 0..inputs.len() {
        let n = inputs[i].len();
        let coords: Vec<usize> = match sampling {
            Some((per_input, _)) if per_input < n => {
                let mut c = sample(&mut rng, n, per_input).into_vec();
                c.sort_unstable();
                c
            }
            _ => (0..n).collect(),
        };
        for j in coords {
            let orig = inputs[i].data()[j];
            let mut at = |offset: f64| -> Result<(f64, bool)> {
                work[i].data_mut()[j] = orig + offset;
                let r = eval(&work);
                work[i].data_mut()[j] = orig;
                r
            };
            let mut h = eps;
            let mut numeric = None;
            let mut fallback = 0.0;
            for attempt in 0..MAX_STEP_REDUCTIONS {
                let (plus, plus_ok) = at(h)?;
                let (minus, minus_ok) = at(-h)?;
                if attempt == 0 {
                    fallback = (plus - minus) / (2.0 * h);
                }
                if plus_ok && minus_ok {
                    numeric = Some((plus - minus) / (2.0 * h));
                    break;
                }
                if attempt == 0 {
                    report.kinks_avoided += 1;
                }
                if minus_ok {
                    let (minus2, ok) = at(-2.0 * h)?;
                    if ok {
                        numeric = Some((3.0 * base_value - 4.0 * minus + minus2) / (2.0 * h));
                        break;
                    }
                }
                if plus_ok {
                    let (plus2, ok) = at(2.0 * h)?;
                    if ok {
                        numeric = Some((-3.0 * base_value + 4.0 * plus - plus2) / (2.0 * h));
                        break;
                    }
                }
                h /= 10.0;
            }
            let numeric = numeric.unwrap_or(fallback);
            let a = analytic[i].data()[j];
            let err = relative_error(a, numeric);
            report.coords_checked += 1;
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((i, j));
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs()).max(DENOMINATOR_FLOOR)
}
