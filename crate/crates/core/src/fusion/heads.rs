use rand::Rng;

use super::config::FusionModelConfig;
use crate::autodiff::{Graph, NodeId, ParamStore};
use crate::error::{Error, Result};
use crate::layers::{Ctx, Init};

/// Named intermediate results of a forward pass, for inspection.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    entries: Vec<(&'static str, NodeId)>,
}

impl Trace {
    pub fn record(&mut self, name: &'static str, id: NodeId) {
        self.entries.push((name, id));
    }

    pub fn get(&self, name: &str) -> Option<NodeId> {
        self.entries.iter().rev().find(|(n, _)| *n == name).map(|&(_, id)| id)
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.iter().map(|&(n, _)| n)
    }
}

/// `fc → BN → relu` per hidden width, then `fc → 2`.
pub fn fc_head(ctx: &mut Ctx<'_>, g: &mut Graph, cfg: &FusionModelConfig, x: NodeId) -> Result<NodeId> {
    let mut x = x;
    for i in 0..cfg.fc_hidden.len() {
        let y = ctx.linear_no_bias(g, &format!("head.fc{i}"), x)?;
        let y = ctx.batch_norm(g, &format!("head.bn{i}"), y)?;
        x = g.relu(y)?;
    }
    ctx.linear(g, "head.out", x)
}

pub fn init_fc_head<R: Rng>(store: &mut ParamStore, cfg: &FusionModelConfig, input: usize, rng: &mut R) {
    let mut fan_in = input;
    for (i, &w) in cfg.fc_hidden.iter().enumerate() {
        Init::linear_no_bias(store, &format!("head.fc{i}"), fan_in, w, rng);
        Init::batch_norm(store, &format!("head.bn{i}"), w);
        fan_in = w;
    }
    Init::logits(store, "head.out", fan_in, 2, rng);
}

fn expect_shape(g: &Graph, id: NodeId, op: &'static str, what: &str, expected: &[usize]) -> Result<()> {
    let got = g.value(id).shape();
    if got != expected {
        return Err(Error::shape(op, format!("{what}: expected {expected:?}, got {got:?}")));
    }
    Ok(())
}

fn check_texts(g: &Graph, op: &'static str, cfg: &FusionModelConfig, n: usize, tt: NodeId, it: NodeId) -> Result<()> {
    expect_shape(g, tt, op, "tweet text", &[n, cfg.hidden()])?;
    expect_shape(g, it, op, "image text", &[n, cfg.hidden()])
}

/// Feature concatenation: `[v_pool, t_tweet, t_imgtext]` through the fc head.
pub fn fcm_forward(
    ctx: &mut Ctx<'_>,
    g: &mut Graph,
    cfg: &FusionModelConfig,
    v_pool: NodeId,
    t_tweet: NodeId,
    t_imgtext: NodeId,
    trace: &mut Trace,
) -> Result<NodeId> {
    let n = g.value(v_pool).shape()[0];
    expect_shape(g, v_pool, "fcm_forward", "visual vector", &[n, cfg.d_v()])?;
    check_texts(g, "fcm_forward", cfg, n, t_tweet, t_imgtext)?;
    let concat = g.concat(&[v_pool, t_tweet, t_imgtext], 1)?;
    trace.record("concat", concat);
    fc_head(ctx, g, cfg, concat)
}

/// Appends both text vectors to every location of `map` along the channel axis.
pub fn tile_concat(g: &mut Graph, map: NodeId, t_tweet: NodeId, t_imgtext: NodeId) -> Result<NodeId> {
    let (h, w) = match *g.value(map).shape() {
        [_, h, w, _] => (h, w),
        ref other => return Err(Error::shape("tile_concat", format!("expected [n,h,w,c] map, got {other:?}"))),
    };
    let a = g.tile_spatial(t_tweet, h, w)?;
    let b = g.tile_spatial(t_imgtext, h, w)?;
    g.concat(&[map, a, b], 3)
}

/// Fusion conv blocks → dropout → spatial average → fc head.
pub fn conv_tail(ctx: &mut Ctx<'_>, g: &mut Graph, cfg: &FusionModelConfig, fused: NodeId, trace: &mut Trace) -> Result<NodeId> {
    let mut x = fused;
    for i in 0..cfg.block_count {
        x = ctx.conv_block(g, &format!("fusion.block{i}"), x, 1, 1)?;
    }
    let x = ctx.dropout(g, x)?;
    let pooled = g.avg_pool(x)?;
    trace.record("pooled", pooled);
    fc_head(ctx, g, cfg, pooled)
}

pub fn init_conv_tail<R: Rng>(store: &mut ParamStore, cfg: &FusionModelConfig, depth: usize, rng: &mut R) {
    let mut cin = depth;
    for i in 0..cfg.block_count {
        Init::conv_block(store, &format!("fusion.block{i}"), cin, cfg.block_channels, rng);
        cin = cfg.block_channels;
    }
    init_fc_head(store, cfg, cfg.block_channels, rng);
}

fn check_map(g: &Graph, op: &'static str, cfg: &FusionModelConfig, v_map: NodeId) -> Result<usize> {
    let n = g.value(v_map).shape().first().copied().unwrap_or(0);
    let s = cfg.map_side();
    expect_shape(g, v_map, op, "visual map", &[n, s, s, cfg.d_v()])?;
    Ok(n)
}

/// Spatial concatenation: texts tiled over the visual map, then [`conv_tail`].
pub fn scm_forward(
    ctx: &mut Ctx<'_>,
    g: &mut Graph,
    cfg: &FusionModelConfig,
    v_map: NodeId,
    t_tweet: NodeId,
    t_imgtext: NodeId,
    trace: &mut Trace,
) -> Result<NodeId> {
    let n = check_map(g, "scm_forward", cfg, v_map)?;
    check_texts(g, "scm_forward", cfg, n, t_tweet, t_imgtext)?;
    let fused = tile_concat(g, v_map, t_tweet, t_imgtext)?;
    trace.record("fused_map", fused);
    conv_tail(ctx, g, cfg, fused, trace)
}

/// `count` kernels of depth `d_v` per example, `[n, count, d_v]`.
///
/// The generator `prefix.w [H, count·d_v]` holds one independent affine map
/// per kernel in consecutive column blocks.
pub fn make_textual_kernels(
    ctx: &mut Ctx<'_>,
    g: &mut Graph,
    prefix: &str,
    t_text: NodeId,
    count: usize,
    d_v: usize,
) -> Result<NodeId> {
    let n = g.value(t_text).shape()[0];
    let flat = ctx.linear(g, prefix, t_text)?;
    expect_shape(g, flat, "make_textual_kernels", "kernel generator output", &[n, count * d_v])?;
    g.reshape(flat, &[n, count, d_v])
}

/// Dynamic 1×1 convolution of the visual map with the `K_t + K_it` textual
/// kernels: `[n, s, s, K_t + K_it]`, before batch norm.
pub fn tkm_multimodal_map(
    ctx: &mut Ctx<'_>,
    g: &mut Graph,
    cfg: &FusionModelConfig,
    v_map: NodeId,
    t_tweet: NodeId,
    t_imgtext: NodeId,
) -> Result<NodeId> {
    let n = check_map(g, "tkm_forward", cfg, v_map)?;
    check_texts(g, "tkm_forward", cfg, n, t_tweet, t_imgtext)?;
    let kt = make_textual_kernels(ctx, g, "kernels.tweet", t_tweet, cfg.k_t, cfg.d_v())?;
    let kit = make_textual_kernels(ctx, g, "kernels.image_text", t_imgtext, cfg.k_it, cfg.d_v())?;
    let kernels = g.concat(&[kt, kit], 1)?;
    g.dynamic_conv1x1(v_map, kernels)
}

/// Textual kernels: multimodal map → batch norm → tiled texts → [`conv_tail`].
pub fn tkm_forward(
    ctx: &mut Ctx<'_>,
    g: &mut Graph,
    cfg: &FusionModelConfig,
    v_map: NodeId,
    t_tweet: NodeId,
    t_imgtext: NodeId,
    trace: &mut Trace,
) -> Result<NodeId> {
    let mm = tkm_multimodal_map(ctx, g, cfg, v_map, t_tweet, t_imgtext)?;
    trace.record("multimodal_map", mm);
    let mm = ctx.batch_norm(g, "kernels.bn", mm)?;
    let fused = tile_concat(g, mm, t_tweet, t_imgtext)?;
    trace.record("fused_map", fused);
    conv_tail(ctx, g, cfg, fused, trace)
}

pub fn init_kernel_generators<R: Rng>(store: &mut ParamStore, cfg: &FusionModelConfig, rng: &mut R) {
    let (h, d) = (cfg.hidden(), cfg.d_v());
    Init::linear(store, "kernels.tweet", h, cfg.k_t * d, rng);
    Init::linear(store, "kernels.image_text", h, cfg.k_it * d, rng);
    Init::batch_norm(store, "kernels.bn", cfg.k_t + cfg.k_it);
}
