//! Multimodal heads: feature concatenation (FCM), spatial concatenation (SCM)
//! and textual kernels (TKM), the text-only LSTM baseline, and zero-masking of
//! unavailable inputs.

mod config;
mod heads;
mod model;

pub use config::{FusionModelConfig, FusionShapes, InputMask, ModelKind};
pub use heads::{
    conv_tail, fc_head, fcm_forward, init_conv_tail, init_fc_head, init_kernel_generators,
    make_textual_kernels, scm_forward, tile_concat, tkm_forward, tkm_multimodal_map, Trace,
};
pub use model::{apply_input_mask, Batch, Forward, FusionModel, ModalityNodes};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{check_gradients_report, Graph, GradCheckReport, Mode, NodeId, ParamStore, Tensor};
use crate::error::Result;
use crate::layers::Ctx;

/// Finite-difference check of the gradient of `Σ r ⊙ logits` (fixed random
/// `r`) with respect to every trainable parameter of `model`.
///
/// At most `per_tensor` seeded coordinates are checked in each parameter.
#[allow(clippy::too_many_arguments)]
pub fn gradcheck_model(
    model: &FusionModel,
    store: &ParamStore,
    batch: &Batch,
    mask: InputMask,
    mode: Mode,
    eps: f64,
    per_tensor: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let names: Vec<String> = store
        .iter()
        .filter(|(_, p)| p.trainable)
        .map(|(n, _)| n.to_string())
        .collect();
    let inputs: Vec<Tensor> = names.iter().map(|n| store.get(n).cloned()).collect::<Result<_>>()?;
    let weights = Tensor::uniform(&[batch.len(), 2], -1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
    let f = |g: &mut Graph, ids: &[NodeId]| {
        let mut ctx = Ctx::new(store, mode, model.config.dropout_rate);
        for (name, &id) in names.iter().zip(ids) {
            ctx.binder.preset(name, id);
        }
        let out = model.forward(&mut ctx, g, batch, mask)?;
        let r = g.constant(weights.clone());
        let y = g.mul(out.logits, r)?;
        g.sum(y)
    };
    check_gradients_report(f, &inputs, eps, Some((per_tensor, seed)))
}

/// A generic point at which to check `model`: seeded parameters with batch
/// norm affines, kernel biases and embeddings spread away from their
/// initial values, running statistics set to the batch statistics, and a
/// batch of `n` random images with 1 to 5 tokens per text.
pub fn gradcheck_point(model: &FusionModel, n: usize, seed: u64) -> Result<(ParamStore, Batch)> {
    let cfg = &model.config;
    let mut store = model.init(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let names: Vec<String> = store.iter().map(|(n, _)| n.to_string()).collect();
    for name in &names {
        let range = if name.ends_with(".gamma") {
            0.5..1.5
        } else if name.ends_with(".beta") || name.ends_with(".embedding") {
            -0.5..0.5
        } else if name.starts_with("kernels.") && name.ends_with(".b") {
            -0.3..0.3
        } else {
            continue;
        };
        for v in store.get_mut(name)?.data_mut() {
            *v = rng.random_range(range.clone());
        }
    }
    let vocab = cfg.text.vocab_size;
    let seq = |rng: &mut ChaCha8Rng| -> Vec<usize> {
        let len = rng.random_range(1..=5);
        (0..len).map(|_| rng.random_range(0..vocab)).collect()
    };
    let side = cfg.backbone.input_side();
    let batch = Batch {
        images: Some(Tensor::uniform(&[n, side, side, 3], 0.0, 1.0, &mut rng)),
        tweet: (0..n).map(|_| seq(&mut rng)).collect(),
        image_text: (0..n).map(|_| seq(&mut rng)).collect(),
    };
    let mut g = Graph::new(seed);
    let mut ctx = Ctx::new(&store, Mode::Train, 0.0);
    model.forward(&mut ctx, &mut g, &batch, InputMask::ALL)?;
    let stats = ctx.batch_stats(&g);
    stats.adopt_into(&mut store)?;
    Ok((store, batch))
}

/// Eval-mode check of `config` at its [`gradcheck_point`] with a batch of two.
pub fn gradcheck_variant(config: FusionModelConfig, eps: f64, per_tensor: usize, seed: u64) -> Result<GradCheckReport> {
    let model = FusionModel::new(config)?;
    let (store, batch) = gradcheck_point(&model, 2, seed)?;
    gradcheck_model(&model, &store, &batch, InputMask::ALL, Mode::Eval, eps, per_tensor, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::VisionBackboneConfig;

    fn tiny(kind: ModelKind) -> FusionModelConfig {
        let mut c = FusionModelConfig::desk(kind, 12);
        c.text.embedding_dim = 4;
        c.text.hidden_dim = 3;
        c.backbone = VisionBackboneConfig::halving(8, 8, &[4, 5]);
        c.k_t = 2;
        c.k_it = 1;
        c.fc_hidden = vec![6, 4];
        c.block_channels = 4;
        c
    }

    fn batch(n: usize, seed: u64, side: usize) -> Batch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seq = |rng: &mut ChaCha8Rng| (0..rng.random_range(0..4)).map(|_| rng.random_range(0..12)).collect();
        Batch {
            images: Some(Tensor::uniform(&[n, side, side, 3], 0.0, 1.0, &mut rng)),
            tweet: (0..n).map(|_| seq(&mut rng)).collect(),
            image_text: (0..n).map(|_| seq(&mut rng)).collect(),
        }
    }

    fn logits(model: &FusionModel, store: &ParamStore, b: &Batch, mask: InputMask) -> Tensor {
        let mut g = Graph::new(0);
        let mut ctx = Ctx::new(store, Mode::Eval, 0.5);
        let out = model.forward(&mut ctx, &mut g, b, mask).unwrap();
        g.value(out.logits).clone()
    }

    #[test]
    fn every_variant_emits_two_logits() {
        for kind in ModelKind::ALL {
            let model = FusionModel::new(tiny(kind)).unwrap();
            let store = model.init(1);
            assert_eq!(logits(&model, &store, &batch(3, 2, 8), InputMask::ALL).shape(), &[3, 2]);
        }
    }

    #[test]
    fn masked_image_content_is_ignored() {
        for kind in [ModelKind::Fcm, ModelKind::Scm, ModelKind::Tkm] {
            let model = FusionModel::new(tiny(kind)).unwrap();
            let store = model.init(3);
            let a = batch(2, 4, 8);
            let mut b = a.clone();
            b.images = batch(2, 5, 8).images;
            assert_eq!(logits(&model, &store, &a, InputMask::TT_IT), logits(&model, &store, &b, InputMask::TT_IT));
            assert_ne!(logits(&model, &store, &a, InputMask::ALL), logits(&model, &store, &b, InputMask::ALL));
        }
    }

    #[test]
    fn masked_text_content_is_ignored() {
        let model = FusionModel::new(tiny(ModelKind::Tkm)).unwrap();
        let store = model.init(3);
        let a = batch(2, 4, 8);
        let mut b = a.clone();
        b.tweet = vec![vec![1, 2], vec![3]];
        b.image_text = vec![vec![], vec![9, 9, 9]];
        assert_eq!(logits(&model, &store, &a, InputMask::I), logits(&model, &store, &b, InputMask::I));
    }

    #[test]
    fn empty_mask_rejected() {
        let model = FusionModel::new(tiny(ModelKind::Fcm)).unwrap();
        let store = model.init(0);
        let mut g = Graph::new(0);
        let mut ctx = Ctx::new(&store, Mode::Eval, 0.5);
        let none = InputMask { tweet_text: false, image_text: false, image: false };
        assert!(model.forward(&mut ctx, &mut g, &batch(1, 0, 8), none).is_err());
    }

    #[test]
    fn zero_kernels_from_zero_text() {
        let cfg = tiny(ModelKind::Tkm);
        let mut store = ParamStore::new();
        init_kernel_generators(&mut store, &cfg, &mut ChaCha8Rng::seed_from_u64(0));
        let mut g = Graph::new(0);
        let mut ctx = Ctx::new(&store, Mode::Eval, 0.0);
        let t = g.constant(Tensor::zeros(&[1, 3]));
        let k = make_textual_kernels(&mut ctx, &mut g, "kernels.tweet", t, 2, 5).unwrap();
        assert_eq!(g.value(k).shape(), &[1, 2, 5]);
        assert!(g.value(k).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_hot_kernel_selects_channel() {
        let mut cfg = tiny(ModelKind::Tkm);
        cfg.k_t = 1;
        cfg.k_it = 1;
        let d = cfg.d_v();
        let mut store = ParamStore::new();
        init_kernel_generators(&mut store, &cfg, &mut ChaCha8Rng::seed_from_u64(0));
        // tweet kernel fixed to one-hot channel 2, image-text kernel to channel 0
        store.get_mut("kernels.tweet.w").unwrap().data_mut().fill(0.0);
        store.get_mut("kernels.image_text.w").unwrap().data_mut().fill(0.0);
        let mut b = vec![0.0; d];
        b[2] = 1.0;
        *store.get_mut("kernels.tweet.b").unwrap() = Tensor::from_vec(b);
        let mut b = vec![0.0; d];
        b[0] = 1.0;
        *store.get_mut("kernels.image_text.b").unwrap() = Tensor::from_vec(b);
        let mut g = Graph::new(0);
        let mut ctx = Ctx::new(&store, Mode::Eval, 0.0);
        let s = cfg.map_side();
        let map = Tensor::uniform(&[1, s, s, d], -1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(9));
        let v = g.constant(map.clone());
        let tt = g.constant(Tensor::uniform(&[1, 3], -1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(1)));
        let it = g.constant(Tensor::zeros(&[1, 3]));
        let mm = tkm_multimodal_map(&mut ctx, &mut g, &cfg, v, tt, it).unwrap();
        let out = g.value(mm).data();
        for p in 0..s * s {
            assert_eq!(out[p * 2], map.data()[p * d + 2]);
            assert_eq!(out[p * 2 + 1], map.data()[p * d]);
        }
    }

    #[test]
    fn gradients_flow_into_text() {
        let cfg = tiny(ModelKind::Tkm);
        let mut store = ParamStore::new();
        init_kernel_generators(&mut store, &cfg, &mut ChaCha8Rng::seed_from_u64(0));
        let mut g = Graph::new(0);
        let mut ctx = Ctx::new(&store, Mode::Eval, 0.0);
        let s = cfg.map_side();
        let v = g.constant(Tensor::uniform(&[1, s, s, cfg.d_v()], 0.0, 1.0, &mut ChaCha8Rng::seed_from_u64(2)));
        let tt = g.param(Tensor::uniform(&[1, 3], -1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(3)));
        let it = g.param(Tensor::zeros(&[1, 3]));
        let mm = tkm_multimodal_map(&mut ctx, &mut g, &cfg, v, tt, it).unwrap();
        let loss = g.sum(mm).unwrap();
        g.backward(loss).unwrap();
        assert!(g.grad(tt).unwrap().data().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn fcm_zero_inputs_zero_biases() {
        let cfg = tiny(ModelKind::Fcm);
        let mut store = ParamStore::new();
        init_fc_head(&mut store, &cfg, cfg.shapes().concat_len, &mut ChaCha8Rng::seed_from_u64(0));
        let mut g = Graph::new(0);
        let mut ctx = Ctx::new(&store, Mode::Eval, 0.0);
        let v = g.constant(Tensor::zeros(&[1, cfg.d_v()]));
        let t = g.constant(Tensor::zeros(&[1, 3]));
        let y = fcm_forward(&mut ctx, &mut g, &cfg, v, t, t, &mut Trace::default()).unwrap();
        assert_eq!(g.value(y).data(), &[0.0, 0.0]);
    }

    #[test]
    fn scm_constant_map_pools_to_any_location() {
        let mut cfg = tiny(ModelKind::Scm);
        cfg.block_count = 0;
        cfg.block_channels = cfg.d_v() + 6;
        let mut store = ParamStore::new();
        init_fc_head(&mut store, &cfg, cfg.block_channels, &mut ChaCha8Rng::seed_from_u64(0));
        let mut g = Graph::new(0);
        let mut ctx = Ctx::new(&store, Mode::Eval, 0.0);
        let s = cfg.map_side();
        let d = cfg.d_v();
        let column: Vec<f64> = (0..d).map(|c| c as f64 * 0.1).collect();
        let map = Tensor::new(vec![1, s, s, d], column.repeat(s * s)).unwrap();
        let v = g.constant(map);
        let t = g.constant(Tensor::from_vec(vec![0.5, -1.0, 2.0]).reshape(&[1, 3]).unwrap());
        let mut trace = Trace::default();
        scm_forward(&mut ctx, &mut g, &cfg, v, t, t, &mut trace).unwrap();
        let pooled = g.value(trace.get("pooled").unwrap()).data().to_vec();
        let fused = g.value(trace.get("fused_map").unwrap()).data();
        assert_eq!(&pooled[..], &fused[..d + 6]);
    }

    #[test]
    fn full_models_pass_gradient_check() {
        for kind in ModelKind::ALL {
            let model = FusionModel::new(tiny(kind)).unwrap();
            let (store, b) = gradcheck_point(&model, 3, 7).unwrap();
            let report = gradcheck_model(&model, &store, &b, InputMask::ALL, Mode::Eval, 1e-5, 6, 11).unwrap();
            assert!(report.passes(1e-4), "{kind}: {report:?}");
        }
    }
}
