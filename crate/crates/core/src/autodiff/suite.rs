//! Randomized gradient checks of every primitive.
//!
//! Each draw picks random shapes, attributes and values for one primitive and
//! checks `Σ r ⊙ op(inputs)` for a fixed random `r`, so every output
//! coordinate contributes a distinct weight to the gradient.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gradcheck::check_gradients_report;
use super::graph::{Graph, NodeId};
use super::primitive::{Mode, PRIMITIVE_NAMES};
use super::tensor::Tensor;
use crate::error::{Error, Result};

type Build = Box<dyn Fn(&mut Graph, &[NodeId]) -> Result<NodeId>>;

/// One randomized instance: differentiable inputs and the scalar function.
struct Case {
    inputs: Vec<Tensor>,
    build: Build,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveCheck {
    pub name: &'static str,
    pub draws: usize,
    pub max_rel_error: f64,
    /// Draw index of the largest error.
    pub worst_draw: usize,
    pub coords_checked: usize,
    pub kinks_avoided: usize,
}

impl PrimitiveCheck {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error <= tolerance
    }
}

fn draw_seed(seed: u64, name: &str, draw: usize) -> u64 {
    let mut h = DefaultHasher::new();
    (seed, name, draw).hash(&mut h);
    h.finish()
}

fn uniform(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::uniform(shape, -1.0, 1.0, rng)
}

fn dims(rng: &mut ChaCha8Rng, rank: usize, max: usize) -> Vec<usize> {
    (0..rank).map(|_| rng.random_range(1..=max)).collect()
}

/// Rank 1 to 3, extents up to `max`.
fn any_shape(rng: &mut ChaCha8Rng, max: usize) -> Vec<usize> {
    let rank = rng.random_range(1..=3);
    dims(rng, rank, max)
}

/// Wraps `op`, whose output has shape `out_shape`, into `Σ r ⊙ op(..)`.
fn weighted<F>(out_shape: &[usize], rng: &mut ChaCha8Rng, op: F) -> Build
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId> + 'static,
{
    let r = uniform(out_shape, rng);
    Box::new(move |g, ids| {
        let y = op(g, ids)?;
        let r = g.constant(r.clone());
        let p = g.mul(y, r)?;
        g.sum(p)
    })
}

fn mode(train: bool) -> Mode {
    if train {
        Mode::Train
    } else {
        Mode::Eval
    }
}

fn case(name: &str, rng: &mut ChaCha8Rng) -> Result<Case> {
    let c = match name {
        "matmul" => {
            let (m, k, n) = (rng.random_range(1..=4), rng.random_range(1..=4), rng.random_range(1..=4));
            Case {
                inputs: vec![uniform(&[m, k], rng), uniform(&[k, n], rng)],
                build: weighted(&[m, n], rng, |g, x| g.matmul(x[0], x[1])),
            }
        }
        "add_bias" => {
            let shape = any_shape(rng, 3);
            let c = *shape.last().expect("rank at least 1");
            Case {
                inputs: vec![uniform(&shape, rng), uniform(&[c], rng)],
                build: weighted(&shape, rng, |g, x| g.add_bias(x[0], x[1])),
            }
        }
        "add" | "mul" => {
            let shape = any_shape(rng, 3);
            let add = name == "add";
            Case {
                inputs: vec![uniform(&shape, rng), uniform(&shape, rng)],
                build: weighted(&shape, rng, move |g, x| if add { g.add(x[0], x[1]) } else { g.mul(x[0], x[1]) }),
            }
        }
        "scale" => {
            let shape = any_shape(rng, 3);
            let factor = rng.random_range(-2.0..2.0);
            Case {
                inputs: vec![uniform(&shape, rng)],
                build: weighted(&shape, rng, move |g, x| g.scale(x[0], factor)),
            }
        }
        "relu" | "sigmoid" | "tanh" => {
            let shape = any_shape(rng, 3);
            let which = match name {
                "relu" => 0,
                "sigmoid" => 1,
                _ => 2,
            };
            Case {
                inputs: vec![Tensor::uniform(&shape, -2.0, 2.0, rng)],
                build: weighted(&shape, rng, move |g, x| match which {
                    0 => g.relu(x[0]),
                    1 => g.sigmoid(x[0]),
                    _ => g.tanh(x[0]),
                }),
            }
        }
        "concat" => {
            let rank = rng.random_range(1..=3);
            let axis = rng.random_range(0..rank);
            let base = dims(rng, rank, 3);
            let parts = rng.random_range(1..=3);
            let mut out = base.clone();
            out[axis] = 0;
            let mut inputs = Vec::new();
            for _ in 0..parts {
                let mut s = base.clone();
                s[axis] = rng.random_range(1..=3);
                out[axis] += s[axis];
                inputs.push(uniform(&s, rng));
            }
            Case {
                inputs,
                build: weighted(&out, rng, move |g, x| g.concat(x, axis)),
            }
        }
        "slice_last" => {
            let mut shape = any_shape(rng, 3);
            let c = rng.random_range(1..=5);
            *shape.last_mut().expect("rank at least 1") = c;
            let start = rng.random_range(0..c);
            let len = rng.random_range(1..=c - start);
            let mut out = shape.clone();
            *out.last_mut().expect("rank at least 1") = len;
            Case {
                inputs: vec![uniform(&shape, rng)],
                build: weighted(&out, rng, move |g, x| g.slice_last(x[0], start, len)),
            }
        }
        "conv2d" => {
            let (n, ci, co) = (rng.random_range(1..=2), rng.random_range(1..=3), rng.random_range(1..=3));
            let (h, w) = (rng.random_range(2..=5), rng.random_range(2..=5));
            let stride = rng.random_range(1..=2);
            let padding = rng.random_range(0..=1);
            let kh = rng.random_range(1..=(h + 2 * padding).min(3));
            let kw = rng.random_range(1..=(w + 2 * padding).min(3));
            let oh = (h + 2 * padding - kh) / stride + 1;
            let ow = (w + 2 * padding - kw) / stride + 1;
            Case {
                inputs: vec![uniform(&[n, h, w, ci], rng), uniform(&[kh, kw, ci, co], rng)],
                build: weighted(&[n, oh, ow, co], rng, move |g, x| g.conv2d(x[0], x[1], stride, padding)),
            }
        }
        "dynamic_conv1x1" => {
            let [n, h, w, d, k] = [2, 3, 3, 4, 3].map(|m| rng.random_range(1..=m));
            Case {
                inputs: vec![uniform(&[n, h, w, d], rng), uniform(&[n, k, d], rng)],
                build: weighted(&[n, h, w, k], rng, |g, x| g.dynamic_conv1x1(x[0], x[1])),
            }
        }
        "avg_pool" => {
            let shape = dims(rng, 4, 3);
            Case {
                inputs: vec![uniform(&shape, rng)],
                build: weighted(&[shape[0], shape[3]], rng, |g, x| g.avg_pool(x[0])),
            }
        }
        "tile_spatial" => {
            let [n, c, h, w] = [3, 4, 3, 3].map(|m| rng.random_range(1..=m));
            Case {
                inputs: vec![uniform(&[n, c], rng)],
                build: weighted(&[n, h, w, c], rng, move |g, x| g.tile_spatial(x[0], h, w)),
            }
        }
        "batch_norm" => {
            let train = rng.random_bool(0.5);
            let rank = if rng.random_bool(0.5) { 2 } else { 4 };
            let mut shape = dims(rng, rank, 3);
            // Train mode needs at least two values per channel.
            shape[0] = rng.random_range(2..=3);
            let c = *shape.last().expect("rank at least 2");
            let mean = uniform(&[c], rng);
            let var = Tensor::uniform(&[c], 0.5, 1.5, rng);
            Case {
                inputs: vec![
                    Tensor::uniform(&shape, -2.0, 2.0, rng),
                    Tensor::uniform(&[c], 0.5, 1.5, rng),
                    uniform(&[c], rng),
                ],
                build: weighted(&shape, rng, move |g, x| {
                    let m = g.constant(mean.clone());
                    let v = g.constant(var.clone());
                    g.batch_norm(x[0], x[1], x[2], m, v, mode(train))
                }),
            }
        }
        "dropout" => {
            let train = rng.random_bool(0.5);
            let rate = rng.random_range(0.0..0.7);
            let shape = any_shape(rng, 4);
            Case {
                inputs: vec![uniform(&shape, rng)],
                build: weighted(&shape, rng, move |g, x| g.dropout(x[0], rate, mode(train))),
            }
        }
        "embedding" => {
            let (v, e, n) = (rng.random_range(1..=5), rng.random_range(1..=4), rng.random_range(1..=6));
            let idx = Tensor::from_vec((0..n).map(|_| rng.random_range(0..v) as f64).collect());
            Case {
                inputs: vec![uniform(&[v, e], rng)],
                build: weighted(&[n, e], rng, move |g, x| {
                    let i = g.constant(idx.clone());
                    g.embedding(x[0], i)
                }),
            }
        }
        "softmax" => {
            let (n, c) = (rng.random_range(1..=4), rng.random_range(1..=5));
            Case {
                inputs: vec![Tensor::uniform(&[n, c], -3.0, 3.0, rng)],
                build: weighted(&[n, c], rng, |g, x| g.softmax(x[0])),
            }
        }
        "weighted_cross_entropy" => {
            let (n, c) = (rng.random_range(1..=5), rng.random_range(2..=4));
            let labels = Tensor::from_vec((0..n).map(|_| rng.random_range(0..c) as f64).collect());
            let weights: Vec<f64> = (0..c).map(|_| rng.random_range(0.2..3.0)).collect();
            Case {
                inputs: vec![Tensor::uniform(&[n, c], -3.0, 3.0, rng)],
                build: Box::new(move |g, x| {
                    let l = g.constant(labels.clone());
                    g.weighted_cross_entropy(x[0], l, &weights)
                }),
            }
        }
        "sum" => {
            let shape = any_shape(rng, 4);
            Case {
                inputs: vec![uniform(&shape, rng)],
                build: Box::new(|g, x| g.sum(x[0])),
            }
        }
        "reshape" => {
            let shape = any_shape(rng, 4);
            let mut out = shape.clone();
            out.shuffle(rng);
            out.push(1);
            Case {
                inputs: vec![uniform(&shape, rng)],
                build: weighted(&out.clone(), rng, move |g, x| g.reshape(x[0], &out)),
            }
        }
        other => return Err(Error::UnknownPrimitive(other.to_string())),
    };
    Ok(c)
}

/// Checks `name` over `draws` random instances and keeps the worst error.
pub fn check_primitive(name: &str, draws: usize, eps: f64, seed: u64) -> Result<PrimitiveCheck> {
    let name = PRIMITIVE_NAMES
        .iter()
        .copied()
        .find(|n| *n == name)
        .ok_or_else(|| Error::UnknownPrimitive(name.to_string()))?;
    let mut out = PrimitiveCheck {
        name,
        draws,
        max_rel_error: 0.0,
        worst_draw: 0,
        coords_checked: 0,
        kinks_avoided: 0,
    };
    for draw in 0..draws {
        let mut rng = ChaCha8Rng::seed_from_u64(draw_seed(seed, name, draw));
        let c = case(name, &mut rng)?;
        let r = check_gradients_report(c.build, &c.inputs, eps, None)?;
        out.coords_checked += r.coords_checked;
        out.kinks_avoided += r.kinks_avoided;
        if r.max_rel_error > out.max_rel_error {
            out.max_rel_error = r.max_rel_error;
            out.worst_draw = draw;
        }
    }
    Ok(out)
}

/// [`check_primitive`] for every name in [`PRIMITIVE_NAMES`].
pub fn check_all_primitives(draws: usize, eps: f64, seed: u64) -> Result<Vec<PrimitiveCheck>> {
    PRIMITIVE_NAMES
        .iter()
        .map(|n| check_primitive(n, draws, eps, seed))
        .collect()
}
