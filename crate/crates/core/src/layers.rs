//! Parameterized building blocks shared by the encoders and fusion heads.
//!
//! Parameters live in a [`ParamStore`] under dotted names; blocks bind them
//! into the current graph through a [`Binder`].

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{Binder, Graph, Mode, NodeId, ParamStore, Tensor, BN_MOMENTUM};
use crate::error::Result;

/// Per-forward state: normalization mode and the batch-norm nodes whose batch
/// statistics must be folded into running averages after a training step.
#[derive(Debug)]
pub struct Ctx<'a> {
    pub binder: Binder<'a>,
    pub mode: Mode,
    pub dropout_rate: f64,
    bn_nodes: Vec<(String, NodeId)>,
}

impl<'a> Ctx<'a> {
    pub fn new(store: &'a ParamStore, mode: Mode, dropout_rate: f64) -> Self {
        Self {
            binder: Binder::new(store),
            mode,
            dropout_rate,
            bn_nodes: Vec::new(),
        }
    }

    pub fn p(&mut self, g: &mut Graph, name: &str) -> Result<NodeId> {
        self.binder.bind(g, name)
    }

    pub fn linear(&mut self, g: &mut Graph, prefix: &str, x: NodeId) -> Result<NodeId> {
        let w = self.p(g, &format!("{prefix}.w"))?;
        let b = self.p(g, &format!("{prefix}.b"))?;
        g.affine(x, w, b)
    }

    pub fn batch_norm(&mut self, g: &mut Graph, prefix: &str, x: NodeId) -> Result<NodeId> {
        let gamma = self.p(g, &format!("{prefix}.gamma"))?;
        let beta = self.p(g, &format!("{prefix}.beta"))?;
        let mean = self.p(g, &format!("{prefix}.running_mean"))?;
        let var = self.p(g, &format!("{prefix}.running_var"))?;
        let y = g.batch_norm(x, gamma, beta, mean, var, self.mode)?;
        if self.mode.is_train() {
            self.bn_nodes.push((prefix.to_string(), y));
        }
        Ok(y)
    }

    /// Bias-free linear map, for layers followed by batch norm.
    pub fn linear_no_bias(&mut self, g: &mut Graph, prefix: &str, x: NodeId) -> Result<NodeId> {
        let w = self.p(g, &format!("{prefix}.w"))?;
        g.matmul(x, w)
    }

    /// 3×3 conv (no bias; the batch norm shift replaces it) → batch norm → relu.
    pub fn conv_block(
        &mut self,
        g: &mut Graph,
        prefix: &str,
        x: NodeId,
        stride: usize,
        padding: usize,
    ) -> Result<NodeId> {
        let w = self.p(g, &format!("{prefix}.conv.w"))?;
        let y = g.conv2d(x, w, stride, padding)?;
        let y = self.batch_norm(g, &format!("{prefix}.bn"), y)?;
        g.relu(y)
    }

    pub fn dropout(&mut self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        g.dropout(x, self.dropout_rate, self.mode)
    }

    /// Batch statistics recorded by the train-mode batch norms of this pass.
    pub fn batch_stats(&self, g: &Graph) -> BatchStats {
        BatchStats(
            self.bn_nodes
                .iter()
                .filter_map(|(prefix, node)| {
                    let (mean, var) = g.batch_stats(*node)?;
                    Some((prefix.clone(), mean.to_vec(), var.to_vec()))
                })
                .collect(),
        )
    }
}

/// Per batch-norm layer `(prefix, mean, var)` from one forward pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchStats(pub Vec<(String, Vec<f64>, Vec<f64>)>);

impl BatchStats {
    /// `running = m·running + (1-m)·batch` for every recorded layer.
    pub fn fold_into(&self, store: &mut ParamStore) -> Result<()> {
        self.update(store, |r, b| BN_MOMENTUM * r + (1.0 - BN_MOMENTUM) * b)
    }

    /// Overwrites the running buffers with the batch statistics.
    pub fn adopt_into(&self, store: &mut ParamStore) -> Result<()> {
        self.update(store, |_, b| b)
    }

    fn update(&self, store: &mut ParamStore, f: impl Fn(f64, f64) -> f64) -> Result<()> {
        for (prefix, mean, var) in &self.0 {
            for (suffix, batch) in [("running_mean", mean), ("running_var", var)] {
                let running = store.get_mut(&format!("{prefix}.{suffix}"))?;
                for (r, &b) in running.data_mut().iter_mut().zip(batch) {
                    *r = f(*r, b);
                }
            }
        }
        Ok(())
    }
}

/// Parameter initializers.
pub struct Init;

impl Init {
    /// Fully connected layer `prefix.{w,b}` with `U(-1/√in, 1/√in)` weights.
    pub fn linear<R: Rng>(store: &mut ParamStore, prefix: &str, fan_in: usize, fan_out: usize, rng: &mut R) {
        let bound = 1.0 / (fan_in as f64).sqrt();
        store.insert(format!("{prefix}.w"), Tensor::uniform(&[fan_in, fan_out], -bound, bound, rng));
        store.insert(format!("{prefix}.b"), Tensor::zeros(&[fan_out]));
    }

    /// Classifier output layer, [`Init::linear`] scaled by 0.1 so logits start near zero.
    pub fn logits<R: Rng>(store: &mut ParamStore, prefix: &str, fan_in: usize, fan_out: usize, rng: &mut R) {
        let bound = 0.1 / (fan_in as f64).sqrt();
        store.insert(format!("{prefix}.w"), Tensor::uniform(&[fan_in, fan_out], -bound, bound, rng));
        store.insert(format!("{prefix}.b"), Tensor::zeros(&[fan_out]));
    }

    /// Bias-free `[fan_in, fan_out]` weights, `U(-1/√in, 1/√in)`.
    pub fn linear_no_bias<R: Rng>(store: &mut ParamStore, prefix: &str, fan_in: usize, fan_out: usize, rng: &mut R) {
        let bound = 1.0 / (fan_in as f64).sqrt();
        store.insert(format!("{prefix}.w"), Tensor::uniform(&[fan_in, fan_out], -bound, bound, rng));
    }

    /// 3×3 convolution weights `prefix.w`, He-normal.
    pub fn conv<R: Rng>(store: &mut ParamStore, prefix: &str, cin: usize, cout: usize, rng: &mut R) {
        let std = (2.0 / (9 * cin) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive std");
        let data = (0..9 * cin * cout).map(|_| normal.sample(rng)).collect();
        store.insert(
            format!("{prefix}.w"),
            Tensor::new(vec![3, 3, cin, cout], data).expect("consistent shape"),
        );
    }

    pub fn batch_norm(store: &mut ParamStore, prefix: &str, channels: usize) {
        store.insert(format!("{prefix}.gamma"), Tensor::full(&[channels], 1.0));
        store.insert(format!("{prefix}.beta"), Tensor::zeros(&[channels]));
        store.insert_buffer(format!("{prefix}.running_mean"), Tensor::zeros(&[channels]));
        store.insert_buffer(format!("{prefix}.running_var"), Tensor::full(&[channels], 1.0));
    }

    pub fn conv_block<R: Rng>(store: &mut ParamStore, prefix: &str, cin: usize, cout: usize, rng: &mut R) {
        Self::conv(store, &format!("{prefix}.conv"), cin, cout, rng);
        Self::batch_norm(store, &format!("{prefix}.bn"), cout);
    }
}
