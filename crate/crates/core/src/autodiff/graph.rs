//! Tape of recorded primitive applications and the reverse sweep over it.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::primitive::{Mode, Primitive};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Default)]
enum Saved {
    #[default]
    None,
    Mask(Vec<f64>),
    Norm {
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
        batch: Option<(Vec<f64>, Vec<f64>)>,
    },
    Probs(Vec<f64>),
}

#[derive(Debug)]
struct Op {
    prim: Primitive,
    inputs: Vec<NodeId>,
    saved: Saved,
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    requires_grad: bool,
    needs_grad: bool,
    op: Option<Op>,
}

/// A single forward computation and its reverse pass.
///
/// Nodes are appended in evaluation order, so the tape is topologically
/// sorted by construction. `backward` may run once per graph.
#[derive(Debug)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
    rng: ChaCha8Rng,
    backward_done: bool,
}

impl Graph {
    /// `seed` drives dropout masks.
    pub fn new(seed: u64) -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            backward_done: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a leaf. Leaves with `requires_grad` receive a gradient on `backward`.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> NodeId {
        self.push(Node {
            value,
            requires_grad,
            needs_grad: requires_grad,
            op: None,
        })
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.leaf(value, false)
    }

    pub fn param(&mut self, value: Tensor) -> NodeId {
        self.leaf(value, true)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn grad(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    pub fn take_grad(&mut self, id: NodeId) -> Option<Tensor> {
        self.grads.get_mut(id.0).and_then(Option::take)
    }

    /// Fingerprint of which relu inputs are positive. Two evaluations with
    /// equal fingerprints lie on the same smooth piece of the function.
    pub fn activation_pattern(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for node in &self.nodes {
            if let Some(Op { prim: Primitive::Relu, inputs, .. }) = &node.op {
                for &v in self.nodes[inputs[0].0].value.data() {
                    (v > 0.0).hash(&mut h);
                }
            }
        }
        h.finish()
    }

    /// Batch mean and (biased) variance computed by a train-mode batch norm node.
    pub fn batch_stats(&self, id: NodeId) -> Option<(&[f64], &[f64])> {
        match self.nodes.get(id.0)?.op.as_ref()?.saved {
            Saved::Norm {
                batch: Some((ref mean, ref var)),
                ..
            } => Some((mean, var)),
            _ => None,
        }
    }

    fn push(&mut self, node: Node) -> NodeId {
        self.nodes.push(node);
        NodeId(self.nodes.len() - 1)
    }

    /// Evaluates `prim` on recorded inputs and records the application.
    pub fn apply(&mut self, prim: Primitive, inputs: &[NodeId]) -> Result<NodeId> {
        if self.backward_done {
            return Err(Error::Graph(
                "graph already differentiated; record a new forward pass".into(),
            ));
        }
        prim.validate()?;
        if let Some(bad) = inputs.iter().find(|id| id.0 >= self.nodes.len()) {
            return Err(Error::Graph(format!("unknown node {}", bad.0)));
        }
        let arity = prim.arity();
        if (arity > 0 && inputs.len() != arity) || inputs.is_empty() {
            return Err(Error::shape(
                prim.name(),
                format!("expected {arity} inputs, got {}", inputs.len()),
            ));
        }
        let values: Vec<&Tensor> = inputs.iter().map(|id| &self.nodes[id.0].value).collect();
        let (value, saved) = forward(&prim, &values, &mut self.rng)?;
        let needs_grad = inputs.iter().any(|id| self.nodes[id.0].needs_grad);
        Ok(self.push(Node {
            value,
            requires_grad: false,
            needs_grad,
            op: Some(Op {
                prim,
                inputs: inputs.to_vec(),
                saved,
            }),
        }))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(Primitive::MatMul, &[a, b])
    }

    pub fn add_bias(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        self.apply(Primitive::AddBias, &[x, bias])
    }

    /// `x · w + b`
    pub fn affine(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let xw = self.matmul(x, w)?;
        self.add_bias(xw, b)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(Primitive::Add, &[a, b])
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(Primitive::Mul, &[a, b])
    }

    pub fn scale(&mut self, x: NodeId, factor: f64) -> Result<NodeId> {
        self.apply(Primitive::Scale { factor }, &[x])
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(Primitive::Relu, &[x])
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(Primitive::Sigmoid, &[x])
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(Primitive::Tanh, &[x])
    }

    pub fn concat(&mut self, parts: &[NodeId], axis: usize) -> Result<NodeId> {
        self.apply(Primitive::Concat { axis }, parts)
    }

    pub fn slice_last(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        self.apply(Primitive::SliceLast { start, len }, &[x])
    }

    pub fn conv2d(
        &mut self,
        x: NodeId,
        kernel: NodeId,
        stride: usize,
        padding: usize,
    ) -> Result<NodeId> {
        self.apply(Primitive::Conv2d { stride, padding }, &[x, kernel])
    }

    pub fn dynamic_conv1x1(&mut self, map: NodeId, kernels: NodeId) -> Result<NodeId> {
        self.apply(Primitive::DynamicConv1x1, &[map, kernels])
    }

    pub fn avg_pool(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(Primitive::AvgPool, &[x])
    }

    pub fn tile_spatial(&mut self, x: NodeId, height: usize, width: usize) -> Result<NodeId> {
        self.apply(Primitive::TileSpatial { height, width }, &[x])
    }

    pub fn batch_norm(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        running_mean: NodeId,
        running_var: NodeId,
        mode: Mode,
    ) -> Result<NodeId> {
        self.apply(
            Primitive::BatchNorm {
                mode,
                eps: super::primitive::BN_EPS,
            },
            &[x, gamma, beta, running_mean, running_var],
        )
    }

    pub fn dropout(&mut self, x: NodeId, rate: f64, mode: Mode) -> Result<NodeId> {
        self.apply(Primitive::Dropout { rate, mode }, &[x])
    }

    pub fn embedding(&mut self, table: NodeId, indices: NodeId) -> Result<NodeId> {
        self.apply(Primitive::Embedding, &[table, indices])
    }

    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(Primitive::Softmax, &[x])
    }

    pub fn weighted_cross_entropy(
        &mut self,
        logits: NodeId,
        labels: NodeId,
        weights: &[f64],
    ) -> Result<NodeId> {
        self.apply(
            Primitive::WeightedCrossEntropy {
                weights: weights.to_vec(),
            },
            &[logits, labels],
        )
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(Primitive::Sum, &[x])
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        self.apply(
            Primitive::Reshape {
                shape: shape.to_vec(),
            },
            &[x],
        )
    }

    /// Reverse sweep from a scalar `loss`.
    ///
    /// Afterwards every `requires_grad` leaf holds a gradient; leaves with no
    /// path to `loss` hold zeros.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.backward_done {
            return Err(Error::Graph(
                "backward already ran for this forward pass".into(),
            ));
        }
        let Some(loss_node) = self.nodes.get(loss.0) else {
            return Err(Error::Graph(format!("unknown loss node {}", loss.0)));
        };
        if !loss_node.value.is_scalar() {
            return Err(Error::shape(
                "backward",
                format!("loss must be scalar, got shape {:?}", loss_node.value.shape()),
            ));
        }
        self.backward_done = true;
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        self.grads[loss.0] = Some(Tensor::full(loss_node.value.shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(dout) = self.grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            if let Some(op) = &node.op {
                if node.needs_grad {
                    let inputs: Vec<&Tensor> =
                        op.inputs.iter().map(|id| &self.nodes[id.0].value).collect();
                    let needs: Vec<bool> =
                        op.inputs.iter().map(|id| self.nodes[id.0].needs_grad).collect();
                    let input_grads =
                        backward(&op.prim, &inputs, &node.value, &op.saved, &dout, &needs);
                    for (input, grad) in op.inputs.iter().zip(input_grads) {
                        if let Some(grad) = grad {
                            accumulate(&mut self.grads[input.0], grad);
                        }
                    }
                }
            }
            if node.requires_grad {
                self.grads[idx] = Some(dout);
            }
        }
        for (idx, node) in self.nodes.iter().enumerate() {
            if node.requires_grad && self.grads[idx].is_none() {
                self.grads[idx] = Some(Tensor::zeros(node.value.shape()));
            }
            if !node.requires_grad {
                self.grads[idx] = None;
            }
        }
        Ok(())
    }
}

fn accumulate(slot: &mut Option<Tensor>, grad: Tensor) {
    match slot {
        Some(existing) => {
            for (a, b) in existing.data_mut().iter_mut().zip(grad.data()) {
                *a += b;
            }
        }
        None => *slot = Some(grad),
    }
}

fn mismatch(prim: &Primitive, detail: String) -> Error {
    Error::shape(prim.name(), detail)
}

fn rows_cols(t: &Tensor) -> (usize, usize) {
    let c = t.last_dim();
    (t.len() / c, c)
}

fn forward(prim: &Primitive, x: &[&Tensor], rng: &mut ChaCha8Rng) -> Result<(Tensor, Saved)> {
    let plain = |t: Tensor| Ok((t, Saved::None));
    match prim {
        Primitive::MatMul => {
            let (a, b) = (x[0], x[1]);
            if a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0] {
                return Err(mismatch(
                    prim,
                    format!("cannot multiply {:?} by {:?}", a.shape(), b.shape()),
                ));
            }
            let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
            plain(Tensor::from_parts(
                vec![m, n],
                matmul(a.data(), b.data(), m, k, n),
            ))
        }
        Primitive::AddBias => {
            let (t, b) = (x[0], x[1]);
            if b.rank() != 1 || b.len() != t.last_dim() {
                return Err(mismatch(
                    prim,
                    format!("bias {:?} does not match trailing axis of {:?}", b.shape(), t.shape()),
                ));
            }
            let mut out = t.clone();
            for row in out.data_mut().chunks_mut(b.len()) {
                for (v, bv) in row.iter_mut().zip(b.data()) {
                    *v += bv;
                }
            }
            plain(out)
        }
        Primitive::Add | Primitive::Mul => {
            let (a, b) = (x[0], x[1]);
            if a.shape() != b.shape() {
                return Err(mismatch(
                    prim,
                    format!("operands {:?} and {:?} differ", a.shape(), b.shape()),
                ));
            }
            let data = if matches!(prim, Primitive::Add) {
                a.data().iter().zip(b.data()).map(|(p, q)| p + q).collect()
            } else {
                a.data().iter().zip(b.data()).map(|(p, q)| p * q).collect()
            };
            plain(Tensor::from_parts(a.shape().to_vec(), data))
        }
        Primitive::Scale { factor } => plain(x[0].map(|v| v * factor)),
        Primitive::Relu => plain(x[0].map(|v| if v > 0.0 { v } else { 0.0 })),
        Primitive::Sigmoid => plain(x[0].map(sigmoid)),
        Primitive::Tanh => plain(x[0].map(f64::tanh)),
        Primitive::Concat { axis } => concat_forward(prim, x, *axis).map(|t| (t, Saved::None)),
        Primitive::SliceLast { start, len } => {
            let t = x[0];
            let c = t.last_dim();
            if start + len > c {
                return Err(mismatch(
                    prim,
                    format!("slice {start}..{} exceeds trailing extent {c}", start + len),
                ));
            }
            let data = t
                .data()
                .chunks(c)
                .flat_map(|row| row[*start..start + len].iter().copied())
                .collect();
            let mut shape = t.shape().to_vec();
            *shape.last_mut().unwrap() = *len;
            plain(Tensor::from_parts(shape, data))
        }
        Primitive::Conv2d { stride, padding } => {
            let geo = ConvGeometry::new(prim, x[0], x[1], *stride, *padding)?;
            plain(geo.forward(x[0].data(), x[1].data()))
        }
        Primitive::DynamicConv1x1 => {
            let (map, ker) = (x[0], x[1]);
            if map.rank() != 4 || ker.rank() != 3 || map.shape()[0] != ker.shape()[0]
                || map.shape()[3] != ker.shape()[2]
            {
                return Err(mismatch(
                    prim,
                    format!(
                        "map {:?} needs kernels [n, k, depth] matching batch and depth, got {:?}",
                        map.shape(),
                        ker.shape()
                    ),
                ));
            }
            let (n, h, w, d) = dims4(map);
            let k = ker.shape()[1];
            let mut out = vec![0.0; n * h * w * k];
            for b in 0..n {
                let kb = &ker.data()[b * k * d..(b + 1) * k * d];
                for p in 0..h * w {
                    let pix = &map.data()[(b * h * w + p) * d..(b * h * w + p + 1) * d];
                    let o = &mut out[(b * h * w + p) * k..(b * h * w + p + 1) * k];
                    for (j, kern) in kb.chunks(d).enumerate() {
                        o[j] = dot(pix, kern);
                    }
                }
            }
            plain(Tensor::from_parts(vec![n, h, w, k], out))
        }
        Primitive::AvgPool => {
            let t = x[0];
            if t.rank() != 4 {
                return Err(mismatch(prim, format!("expected [n,h,w,c], got {:?}", t.shape())));
            }
            let (n, h, w, c) = dims4(t);
            let mut out = vec![0.0; n * c];
            let inv = 1.0 / (h * w) as f64;
            for b in 0..n {
                let o = &mut out[b * c..(b + 1) * c];
                for pix in t.data()[b * h * w * c..(b + 1) * h * w * c].chunks(c) {
                    for (acc, v) in o.iter_mut().zip(pix) {
                        *acc += v;
                    }
                }
                for v in o.iter_mut() {
                    *v *= inv;
                }
            }
            plain(Tensor::from_parts(vec![n, c], out))
        }
        Primitive::TileSpatial { height, width } => {
            let t = x[0];
            if t.rank() != 2 {
                return Err(mismatch(prim, format!("expected [n,c], got {:?}", t.shape())));
            }
            let (n, c) = (t.shape()[0], t.shape()[1]);
            let mut out = Vec::with_capacity(n * height * width * c);
            for row in t.data().chunks(c) {
                for _ in 0..height * width {
                    out.extend_from_slice(row);
                }
            }
            plain(Tensor::from_parts(vec![n, *height, *width, c], out))
        }
        Primitive::BatchNorm { mode, eps } => batch_norm_forward(prim, x, *mode, *eps),
        Primitive::Dropout { rate, mode } => {
            if !mode.is_train() || *rate == 0.0 {
                return plain(x[0].clone());
            }
            let keep = 1.0 / (1.0 - rate);
            let mask: Vec<f64> = (0..x[0].len())
                .map(|_| if rng.random::<f64>() >= *rate { keep } else { 0.0 })
                .collect();
            let data = x[0].data().iter().zip(&mask).map(|(v, m)| v * m).collect();
            Ok((
                Tensor::from_parts(x[0].shape().to_vec(), data),
                Saved::Mask(mask),
            ))
        }
        Primitive::Embedding => {
            let (table, idx) = (x[0], x[1]);
            if table.rank() != 2 || idx.rank() != 1 {
                return Err(mismatch(
                    prim,
                    format!("expected table [v,e] and indices [n], got {:?} and {:?}", table.shape(), idx.shape()),
                ));
            }
            let (v, e) = (table.shape()[0], table.shape()[1]);
            let mut out = Vec::with_capacity(idx.len() * e);
            for &raw in idx.data() {
                let i = class_index(prim, raw, v)?;
                out.extend_from_slice(&table.data()[i * e..(i + 1) * e]);
            }
            plain(Tensor::from_parts(vec![idx.len(), e], out))
        }
        Primitive::Softmax => {
            let t = x[0];
            if t.rank() != 2 {
                return Err(mismatch(prim, format!("expected [n,c], got {:?}", t.shape())));
            }
            let (_, c) = rows_cols(t);
            let data: Vec<f64> = t.data().chunks(c).flat_map(softmax_row).collect();
            let out = Tensor::from_parts(t.shape().to_vec(), data);
            Ok((out, Saved::None))
        }
        Primitive::WeightedCrossEntropy { weights } => {
            let (logits, labels) = (x[0], x[1]);
            if logits.rank() != 2 || labels.rank() != 1 || labels.len() != logits.shape()[0] {
                return Err(mismatch(
                    prim,
                    format!("expected logits [n,c] and labels [n], got {:?} and {:?}", logits.shape(), labels.shape()),
                ));
            }
            let (n, c) = (logits.shape()[0], logits.shape()[1]);
            if weights.len() != c {
                return Err(mismatch(
                    prim,
                    format!("{} class weights for {c} classes", weights.len()),
                ));
            }
            let mut probs = Vec::with_capacity(n * c);
            let mut total = 0.0;
            for (row, &raw) in logits.data().chunks(c).zip(labels.data()) {
                let y = class_index(prim, raw, c)?;
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
                total += weights[y] * (lse - row[y]);
                probs.extend(row.iter().map(|z| (z - lse).exp()));
            }
            Ok((Tensor::scalar(total / n as f64), Saved::Probs(probs)))
        }
        Primitive::Sum => plain(Tensor::scalar(x[0].data().iter().sum())),
        Primitive::Reshape { shape } => x[0].clone().reshape(shape).map(|t| (t, Saved::None)),
    }
}

fn backward(
    prim: &Primitive,
    x: &[&Tensor],
    out: &Tensor,
    saved: &Saved,
    dout: &Tensor,
    needs: &[bool],
) -> Vec<Option<Tensor>> {
    let like = |t: &Tensor, data: Vec<f64>| Some(Tensor::from_parts(t.shape().to_vec(), data));
    let dy = dout.data();
    match prim {
        Primitive::MatMul => {
            let (a, b) = (x[0], x[1]);
            let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
            let da = needs[0].then(|| {
                let mut da = vec![0.0; m * k];
                for i in 0..m {
                    let drow = &dy[i * n..(i + 1) * n];
                    for p in 0..k {
                        da[i * k + p] = dot(drow, &b.data()[p * n..(p + 1) * n]);
                    }
                }
                Tensor::from_parts(vec![m, k], da)
            });
            let db = needs[1].then(|| {
                let mut db = vec![0.0; k * n];
                for i in 0..m {
                    let drow = &dy[i * n..(i + 1) * n];
                    for p in 0..k {
                        axpy(a.data()[i * k + p], drow, &mut db[p * n..(p + 1) * n]);
                    }
                }
                Tensor::from_parts(vec![k, n], db)
            });
            vec![da, db]
        }
        Primitive::AddBias => {
            let c = x[1].len();
            let db = needs[1].then(|| {
                let mut db = vec![0.0; c];
                for row in dy.chunks(c) {
                    for (acc, v) in db.iter_mut().zip(row) {
                        *acc += v;
                    }
                }
                Tensor::from_parts(vec![c], db)
            });
            vec![needs[0].then(|| dout.clone()), db]
        }
        Primitive::Add => vec![needs[0].then(|| dout.clone()), needs[1].then(|| dout.clone())],
        Primitive::Mul => {
            let prod = |other: &Tensor| dy.iter().zip(other.data()).map(|(g, o)| g * o).collect();
            vec![
                if needs[0] { like(x[0], prod(x[1])) } else { None },
                if needs[1] { like(x[1], prod(x[0])) } else { None },
            ]
        }
        Primitive::Scale { factor } => vec![Some(dout.map(|g| g * factor))],
        Primitive::Relu => vec![like(
            x[0],
            dy.iter()
                .zip(x[0].data())
                .map(|(g, v)| if *v > 0.0 { *g } else { 0.0 })
                .collect(),
        )],
        Primitive::Sigmoid => vec![like(
            x[0],
            dy.iter().zip(out.data()).map(|(g, y)| g * y * (1.0 - y)).collect(),
        )],
        Primitive::Tanh => vec![like(
            x[0],
            dy.iter().zip(out.data()).map(|(g, y)| g * (1.0 - y * y)).collect(),
        )],
        Primitive::Concat { axis } => {
            let outer: usize = x[0].shape()[..*axis].iter().product();
            let inners: Vec<usize> = x
                .iter()
                .map(|t| t.shape()[*axis..].iter().product())
                .collect();
            let total: usize = inners.iter().sum();
            let mut offset = 0;
            let mut grads = Vec::with_capacity(x.len());
            for (t, (&inner, &need)) in x.iter().zip(inners.iter().zip(needs)) {
                if need {
                    let mut g = Vec::with_capacity(t.len());
                    for o in 0..outer {
                        let start = o * total + offset;
                        g.extend_from_slice(&dy[start..start + inner]);
                    }
                    grads.push(like(t, g));
                } else {
                    grads.push(None);
                }
                offset += inner;
            }
            grads
        }
        Primitive::SliceLast { start, len } => {
            let c = x[0].last_dim();
            let mut g = vec![0.0; x[0].len()];
            for (grow, drow) in g.chunks_mut(c).zip(dy.chunks(*len)) {
                grow[*start..start + len].copy_from_slice(drow);
            }
            vec![like(x[0], g)]
        }
        Primitive::Conv2d { stride, padding } => {
            let geo = ConvGeometry::new(prim, x[0], x[1], *stride, *padding)
                .expect("geometry validated in forward");
            let (dx, dw) = geo.backward(x[0].data(), x[1].data(), dy, needs[0], needs[1]);
            vec![dx.and_then(|d| like(x[0], d)), dw.and_then(|d| like(x[1], d))]
        }
        Primitive::DynamicConv1x1 => {
            let (map, ker) = (x[0], x[1]);
            let (n, h, w, d) = dims4(map);
            let k = ker.shape()[1];
            let mut dmap = needs[0].then(|| vec![0.0; map.len()]);
            let mut dker = needs[1].then(|| vec![0.0; ker.len()]);
            for b in 0..n {
                let kb = &ker.data()[b * k * d..(b + 1) * k * d];
                for p in 0..h * w {
                    let pix_at = (b * h * w + p) * d;
                    let pix = &map.data()[pix_at..pix_at + d];
                    let g = &dy[(b * h * w + p) * k..(b * h * w + p + 1) * k];
                    for (j, &gj) in g.iter().enumerate() {
                        if let Some(dm) = dmap.as_mut() {
                            axpy(gj, &kb[j * d..(j + 1) * d], &mut dm[pix_at..pix_at + d]);
                        }
                        if let Some(dk) = dker.as_mut() {
                            let at = b * k * d + j * d;
                            axpy(gj, pix, &mut dk[at..at + d]);
                        }
                    }
                }
            }
            vec![dmap.and_then(|v| like(map, v)), dker.and_then(|v| like(ker, v))]
        }
        Primitive::AvgPool => {
            let (n, h, w, c) = dims4(x[0]);
            let inv = 1.0 / (h * w) as f64;
            let mut g = Vec::with_capacity(x[0].len());
            for b in 0..n {
                let row = &dy[b * c..(b + 1) * c];
                for _ in 0..h * w {
                    g.extend(row.iter().map(|v| v * inv));
                }
            }
            vec![like(x[0], g)]
        }
        Primitive::TileSpatial { height, width } => {
            let c = x[0].shape()[1];
            let mut g = vec![0.0; x[0].len()];
            for (grow, block) in g.chunks_mut(c).zip(dy.chunks(height * width * c)) {
                for pix in block.chunks(c) {
                    for (acc, v) in grow.iter_mut().zip(pix) {
                        *acc += v;
                    }
                }
            }
            vec![like(x[0], g)]
        }
        Primitive::BatchNorm { mode, .. } => {
            let Saved::Norm { xhat, inv_std, .. } = saved else {
                unreachable!("batch norm saves normalized values")
            };
            let gamma = x[1].data();
            let c = gamma.len();
            let m = x[0].len() / c;
            let mut sum_dy = vec![0.0; c];
            let mut sum_dy_xhat = vec![0.0; c];
            for (grow, xrow) in dy.chunks(c).zip(xhat.chunks(c)) {
                for j in 0..c {
                    sum_dy[j] += grow[j];
                    sum_dy_xhat[j] += grow[j] * xrow[j];
                }
            }
            let dx = needs[0].then(|| {
                let mut dx = Vec::with_capacity(x[0].len());
                for (grow, xrow) in dy.chunks(c).zip(xhat.chunks(c)) {
                    for j in 0..c {
                        let scale = gamma[j] * inv_std[j];
                        dx.push(if mode.is_train() {
                            scale / m as f64
                                * (m as f64 * grow[j] - sum_dy[j] - xrow[j] * sum_dy_xhat[j])
                        } else {
                            scale * grow[j]
                        });
                    }
                }
                Tensor::from_parts(x[0].shape().to_vec(), dx)
            });
            vec![
                dx,
                needs[1].then(|| Tensor::from_parts(vec![c], sum_dy_xhat)),
                needs[2].then(|| Tensor::from_parts(vec![c], sum_dy)),
                needs[3].then(|| Tensor::zeros(&[c])),
                needs[4].then(|| Tensor::zeros(&[c])),
            ]
        }
        Primitive::Dropout { .. } => match saved {
            Saved::Mask(mask) => vec![like(
                x[0],
                dy.iter().zip(mask).map(|(g, m)| g * m).collect(),
            )],
            _ => vec![Some(dout.clone())],
        },
        Primitive::Embedding => {
            let (table, idx) = (x[0], x[1]);
            let e = table.shape()[1];
            let dt = needs[0].then(|| {
                let mut dt = vec![0.0; table.len()];
                for (&raw, row) in idx.data().iter().zip(dy.chunks(e)) {
                    let i = raw as usize;
                    axpy(1.0, row, &mut dt[i * e..(i + 1) * e]);
                }
                Tensor::from_parts(table.shape().to_vec(), dt)
            });
            vec![dt, needs[1].then(|| Tensor::zeros(idx.shape()))]
        }
        Primitive::Softmax => {
            let c = out.last_dim();
            let mut g = Vec::with_capacity(out.len());
            for (yrow, grow) in out.data().chunks(c).zip(dy.chunks(c)) {
                let inner = dot(yrow, grow);
                g.extend(yrow.iter().zip(grow).map(|(y, gv)| y * (gv - inner)));
            }
            vec![like(x[0], g)]
        }
        Primitive::WeightedCrossEntropy { weights } => {
            let Saved::Probs(probs) = saved else {
                unreachable!("cross entropy saves probabilities")
            };
            let (n, c) = (x[0].shape()[0], x[0].shape()[1]);
            debug_assert_eq!(probs.len(), n * c);
            let upstream = dy[0] / n as f64;
            let mut g = probs.clone();
            for (&raw, row) in x[1].data().iter().zip(g.chunks_mut(c)) {
                let y = raw as usize;
                row[y] -= 1.0;
                let s = upstream * weights[y];
                for v in row.iter_mut() {
                    *v *= s;
                }
            }
            vec![like(x[0], g), needs[1].then(|| Tensor::zeros(x[1].shape()))]
        }
        Primitive::Sum => vec![Some(Tensor::full(x[0].shape(), dy[0]))],
        Primitive::Reshape { .. } => vec![like(x[0], dy.to_vec())],
    }
}

fn concat_forward(prim: &Primitive, x: &[&Tensor], axis: usize) -> Result<Tensor> {
    let first = x[0];
    if axis >= first.rank() {
        return Err(mismatch(
            prim,
            format!("axis {axis} out of range for rank {}", first.rank()),
        ));
    }
    for t in &x[1..] {
        let same_rank = t.rank() == first.rank();
        let same_off_axis = same_rank
            && t.shape()
                .iter()
                .zip(first.shape())
                .enumerate()
                .all(|(i, (a, b))| i == axis || a == b);
        if !same_off_axis {
            return Err(mismatch(
                prim,
                format!(
                    "{:?} and {:?} differ off axis {axis}",
                    first.shape(),
                    t.shape()
                ),
            ));
        }
    }
    let outer: usize = first.shape()[..axis].iter().product();
    let mut shape = first.shape().to_vec();
    shape[axis] = x.iter().map(|t| t.shape()[axis]).sum();
    let mut data = Vec::with_capacity(shape.iter().product());
    for o in 0..outer {
        for t in x {
            let inner: usize = t.shape()[axis..].iter().product();
            data.extend_from_slice(&t.data()[o * inner..(o + 1) * inner]);
        }
    }
    Ok(Tensor::from_parts(shape, data))
}

fn batch_norm_forward(
    prim: &Primitive,
    x: &[&Tensor],
    mode: Mode,
    eps: f64,
) -> Result<(Tensor, Saved)> {
    let t = x[0];
    let c = t.last_dim();
    if t.rank() < 2 || x[1..].iter().any(|p| p.rank() != 1 || p.len() != c) {
        return Err(mismatch(
            prim,
            format!(
                "input {:?} needs rank >= 2 and per-channel parameters of length {c}",
                t.shape()
            ),
        ));
    }
    let (gamma, beta) = (x[1].data(), x[2].data());
    let m = t.len() / c;
    let (mean, var) = if mode.is_train() {
        let mut mean = vec![0.0; c];
        for row in t.data().chunks(c) {
            for (acc, v) in mean.iter_mut().zip(row) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= m as f64);
        let mut var = vec![0.0; c];
        for row in t.data().chunks(c) {
            for j in 0..c {
                let d = row[j] - mean[j];
                var[j] += d * d;
            }
        }
        var.iter_mut().for_each(|v| *v /= m as f64);
        (mean, var)
    } else {
        (x[3].data().to_vec(), x[4].data().to_vec())
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
    let mut xhat = Vec::with_capacity(t.len());
    let mut out = Vec::with_capacity(t.len());
    for row in t.data().chunks(c) {
        for j in 0..c {
            let h = (row[j] - mean[j]) * inv_std[j];
            xhat.push(h);
            out.push(gamma[j] * h + beta[j]);
        }
    }
    Ok((
        Tensor::from_parts(t.shape().to_vec(), out),
        Saved::Norm {
            xhat,
            inv_std,
            batch: mode.is_train().then_some((mean, var)),
        },
    ))
}

struct ConvGeometry {
    n: usize,
    h: usize,
    w: usize,
    ci: usize,
    kh: usize,
    kw: usize,
    co: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    padding: usize,
}

impl ConvGeometry {
    fn new(
        prim: &Primitive,
        x: &Tensor,
        k: &Tensor,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        if x.rank() != 4 || k.rank() != 4 || x.shape()[3] != k.shape()[2] {
            return Err(mismatch(
                prim,
                format!(
                    "input [n,h,w,ci] {:?} and kernel [kh,kw,ci,co] {:?} disagree",
                    x.shape(),
                    k.shape()
                ),
            ));
        }
        let (n, h, w, ci) = dims4(x);
        let (kh, kw, _, co) = dims4(k);
        if h + 2 * padding < kh || w + 2 * padding < kw {
            return Err(mismatch(
                prim,
                format!("kernel {kh}x{kw} larger than padded input {h}x{w} (padding {padding})"),
            ));
        }
        Ok(Self {
            n,
            h,
            w,
            ci,
            kh,
            kw,
            co,
            oh: (h + 2 * padding - kh) / stride + 1,
            ow: (w + 2 * padding - kw) / stride + 1,
            stride,
            padding,
        })
    }

    /// Visits every (output pixel, input pixel, kernel tap) triple.
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        for b in 0..self.n {
            for oy in 0..self.oh {
                for ox in 0..self.ow {
                    let out_at = ((b * self.oh + oy) * self.ow + ox) * self.co;
                    for ky in 0..self.kh {
                        let Some(iy) = (oy * self.stride + ky).checked_sub(self.padding) else {
                            continue;
                        };
                        if iy >= self.h {
                            continue;
                        }
                        for kx in 0..self.kw {
                            let Some(ix) = (ox * self.stride + kx).checked_sub(self.padding)
                            else {
                                continue;
                            };
                            if ix >= self.w {
                                continue;
                            }
                            let in_at = ((b * self.h + iy) * self.w + ix) * self.ci;
                            let tap_at = (ky * self.kw + kx) * self.ci * self.co;
                            f(out_at, in_at, tap_at);
                        }
                    }
                }
            }
        }
    }

    fn forward(&self, x: &[f64], k: &[f64]) -> Tensor {
        let (ci, co) = (self.ci, self.co);
        let mut out = vec![0.0; self.n * self.oh * self.ow * co];
        self.for_each_tap(|out_at, in_at, tap_at| {
            let o = &mut out[out_at..out_at + co];
            for c in 0..ci {
                axpy(x[in_at + c], &k[tap_at + c * co..tap_at + (c + 1) * co], o);
            }
        });
        Tensor::from_parts(vec![self.n, self.oh, self.ow, co], out)
    }

    fn backward(
        &self,
        x: &[f64],
        k: &[f64],
        dy: &[f64],
        need_x: bool,
        need_k: bool,
    ) -> (Option<Vec<f64>>, Option<Vec<f64>>) {
        let (ci, co) = (self.ci, self.co);
        let mut dx = need_x.then(|| vec![0.0; x.len()]);
        let mut dk = need_k.then(|| vec![0.0; k.len()]);
        self.for_each_tap(|out_at, in_at, tap_at| {
            let g = &dy[out_at..out_at + co];
            for c in 0..ci {
                let tap = tap_at + c * co..tap_at + (c + 1) * co;
                if let Some(dx) = dx.as_mut() {
                    dx[in_at + c] += dot(g, &k[tap.clone()]);
                }
                if let Some(dk) = dk.as_mut() {
                    axpy(x[in_at + c], g, &mut dk[tap]);
                }
            }
        });
        (dx, dk)
    }
}

fn dims4(t: &Tensor) -> (usize, usize, usize, usize) {
    let s = t.shape();
    (s[0], s[1], s[2], s[3])
}

fn class_index(prim: &Primitive, raw: f64, bound: usize) -> Result<usize> {
    if raw >= 0.0 && raw.fract() == 0.0 && (raw as usize) < bound {
        Ok(raw as usize)
    } else {
        Err(mismatch(prim, format!("index {raw} outside 0..{bound}")))
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_row(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += alpha * xv;
    }
}

fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            axpy(a[i * k + p], &b[p * n..(p + 1) * n], row);
        }
    }
    c
}
