use rand::Rng;

use crate::autodiff::{Graph, Mode, NodeId, ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::layers::Ctx;

/// Single-layer LSTM text encoder dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TextEncoderConfig {
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub vocab_size: usize,
}

impl TextEncoderConfig {
    pub const PAPER_EMBEDDING_DIM: usize = 100;
    pub const PAPER_HIDDEN_DIM: usize = 150;

    pub fn paper(vocab_size: usize) -> Self {
        Self {
            embedding_dim: Self::PAPER_EMBEDDING_DIM,
            hidden_dim: Self::PAPER_HIDDEN_DIM,
            vocab_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0 || self.hidden_dim == 0 || self.vocab_size == 0 {
            return Err(Error::Config(format!(
                "text encoder dims must be positive, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Embedding rows start in `U(-0.05, 0.05)`.
pub const EMBEDDING_INIT_RANGE: f64 = 0.05;

/// Parameters under `prefix`: `embedding [V,E]`, `w_x [E,4H]`, `w_h [H,4H]`,
/// `b [4H]`. Gate blocks are ordered input, forget, cell, output; the forget
/// bias starts at 1.
pub fn init_lstm<R: Rng>(store: &mut ParamStore, prefix: &str, cfg: &TextEncoderConfig, rng: &mut R) {
    let (e, h) = (cfg.embedding_dim, cfg.hidden_dim);
    let r = EMBEDDING_INIT_RANGE;
    store.insert(
        format!("{prefix}.embedding"),
        Tensor::uniform(&[cfg.vocab_size, e], -r, r, rng),
    );
    let bx = 1.0 / (e as f64).sqrt();
    let bh = 1.0 / (h as f64).sqrt();
    store.insert(format!("{prefix}.w_x"), Tensor::uniform(&[e, 4 * h], -bx, bx, rng));
    store.insert(format!("{prefix}.w_h"), Tensor::uniform(&[h, 4 * h], -bh, bh, rng));
    let mut b = Tensor::zeros(&[4 * h]);
    b.data_mut()[h..2 * h].fill(1.0);
    store.insert(format!("{prefix}.b"), b);
}

/// Runs the LSTM over a batch of index sequences and returns the final hidden
/// states `[n, H]`.
///
/// Sequences may differ in length: once a sequence ends its state is carried
/// unchanged, so each row is `h` after its own last token. Empty sequences
/// yield zeros.
pub fn encode_text_batch(
    ctx: &mut Ctx<'_>,
    g: &mut Graph,
    prefix: &str,
    cfg: &TextEncoderConfig,
    batch: &[Vec<usize>],
) -> Result<NodeId> {
    let n = batch.len();
    let hd = cfg.hidden_dim;
    let steps = batch.iter().map(Vec::len).max().unwrap_or(0);
    let zeros = g.constant(Tensor::zeros(&[n, hd]));
    if steps == 0 {
        return Ok(zeros);
    }
    let table = ctx.p(g, &format!("{prefix}.embedding"))?;
    let w_x = ctx.p(g, &format!("{prefix}.w_x"))?;
    let w_h = ctx.p(g, &format!("{prefix}.w_h"))?;
    let b = ctx.p(g, &format!("{prefix}.b"))?;
    let (mut h, mut c) = (zeros, zeros);
    for t in 0..steps {
        let idx: Vec<f64> = batch
            .iter()
            .map(|s| s.get(t).map_or(0.0, |&i| i as f64))
            .collect();
        let idx = g.constant(Tensor::from_vec(idx));
        let x = g.embedding(table, idx)?;
        let xw = g.matmul(x, w_x)?;
        let hw = g.matmul(h, w_h)?;
        let z = g.add(xw, hw)?;
        let z = g.add_bias(z, b)?;
        let gi = g.slice_last(z, 0, hd)?;
        let gf = g.slice_last(z, hd, hd)?;
        let gg = g.slice_last(z, 2 * hd, hd)?;
        let go = g.slice_last(z, 3 * hd, hd)?;
        let i = g.sigmoid(gi)?;
        let f = g.sigmoid(gf)?;
        let cand = g.tanh(gg)?;
        let o = g.sigmoid(go)?;
        let fc = g.mul(f, c)?;
        let ig = g.mul(i, cand)?;
        let c_new = g.add(fc, ig)?;
        let tc = g.tanh(c_new)?;
        let h_new = g.mul(o, tc)?;
        if batch.iter().all(|s| s.len() > t) {
            h = h_new;
            c = c_new;
        } else {
            let keep: Vec<f64> = batch
                .iter()
                .flat_map(|s| std::iter::repeat_n(if s.len() > t { 1.0 } else { 0.0 }, hd))
                .collect();
            let hold = keep.iter().map(|k| 1.0 - k).collect();
            let keep = g.constant(Tensor::new(vec![n, hd], keep)?);
            let hold = g.constant(Tensor::new(vec![n, hd], hold)?);
            h = blend(g, keep, hold, h_new, h)?;
            c = blend(g, keep, hold, c_new, c)?;
        }
    }
    Ok(h)
}

fn blend(g: &mut Graph, keep: NodeId, hold: NodeId, new: NodeId, old: NodeId) -> Result<NodeId> {
    let a = g.mul(keep, new)?;
    let b = g.mul(hold, old)?;
    g.add(a, b)
}

/// Final hidden state of one token sequence, evaluated outside training.
pub fn encode_text(
    store: &ParamStore,
    prefix: &str,
    cfg: &TextEncoderConfig,
    tokens: &[usize],
) -> Result<Vec<f64>> {
    let mut g = Graph::new(0);
    let mut ctx = Ctx::new(store, Mode::Eval, 0.0);
    let h = encode_text_batch(&mut ctx, &mut g, prefix, cfg, &[tokens.to_vec()])?;
    Ok(g.value(h).data().to_vec())
}

/// Text-only classifier: LSTM under `prefix`, then `head` mapping `H → 2`.
pub fn lstm_classifier_logits(
    ctx: &mut Ctx<'_>,
    g: &mut Graph,
    prefix: &str,
    head: &str,
    cfg: &TextEncoderConfig,
    batch: &[Vec<usize>],
) -> Result<NodeId> {
    let h = encode_text_batch(ctx, g, prefix, cfg, batch)?;
    ctx.linear(g, head, h)
}
