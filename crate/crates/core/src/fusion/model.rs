use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{FusionModelConfig, InputMask, ModelKind};
use super::heads::{
    fcm_forward, init_conv_tail, init_fc_head, init_kernel_generators, scm_forward,
    tkm_forward, Trace,
};
use crate::autodiff::{Graph, NodeId, ParamStore, Tensor};
use crate::encoders::{encode_text_batch, init_backbone, init_lstm, vision_features};
use crate::error::{Error, Result};
use crate::layers::{Ctx, Init};

/// Model inputs for `n` examples.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// `[n, input_side, input_side, 3]`; may be omitted for text-only models.
    pub images: Option<Tensor>,
    pub tweet: Vec<Vec<usize>>,
    pub image_text: Vec<Vec<usize>>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.tweet.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweet.is_empty()
    }
}

/// Encoded (or raw, for the image) inputs as graph nodes.
#[derive(Debug, Clone, Copy)]
pub struct ModalityNodes {
    pub image: Option<NodeId>,
    pub tweet_text: NodeId,
    pub image_text: NodeId,
}

/// Replaces every input the mask disables with zeros of the same shape.
pub fn apply_input_mask(g: &mut Graph, inputs: ModalityNodes, mask: InputMask) -> Result<ModalityNodes> {
    mask.validate()?;
    let mut zero_if = |on: bool, id: NodeId| {
        if on {
            id
        } else {
            let shape = g.value(id).shape().to_vec();
            g.constant(Tensor::zeros(&shape))
        }
    };
    Ok(ModalityNodes {
        image: inputs.image.map(|id| zero_if(mask.image, id)),
        tweet_text: zero_if(mask.tweet_text, inputs.tweet_text),
        image_text: zero_if(mask.image_text, inputs.image_text),
    })
}

/// Logits `[n, 2]` plus named intermediates.
#[derive(Debug, Clone)]
pub struct Forward {
    pub logits: NodeId,
    pub trace: Trace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionModel {
    pub config: FusionModelConfig,
}

impl FusionModel {
    pub fn new(config: FusionModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    /// Freshly initialized parameters, deterministic in `seed`.
    pub fn init(&self, seed: u64) -> ParamStore {
        let cfg = &self.config;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        init_lstm(&mut store, cfg.tweet_prefix(), &cfg.text, &mut rng);
        if cfg.kind == ModelKind::Lstm {
            Init::logits(&mut store, "head.out", cfg.hidden(), 2, &mut rng);
            return store;
        }
        if !cfg.shared_text_encoder {
            init_lstm(&mut store, cfg.image_text_prefix(), &cfg.text, &mut rng);
        }
        init_backbone(&mut store, "vision", &cfg.backbone, &mut rng);
        let shapes = cfg.shapes();
        match cfg.kind {
            ModelKind::Fcm => init_fc_head(&mut store, cfg, shapes.concat_len, &mut rng),
            ModelKind::Scm => init_conv_tail(&mut store, cfg, shapes.scm_fused_map[2], &mut rng),
            ModelKind::Tkm => {
                init_kernel_generators(&mut store, cfg, &mut rng);
                init_conv_tail(&mut store, cfg, shapes.tkm_fused_map[2], &mut rng);
            }
            ModelKind::Lstm => unreachable!(),
        }
        store
    }

    fn encode(&self, ctx: &mut Ctx<'_>, g: &mut Graph, prefix: &str, on: bool, seqs: &[Vec<usize>]) -> Result<NodeId> {
        if on {
            encode_text_batch(ctx, g, prefix, &self.config.text, seqs)
        } else {
            Ok(g.constant(Tensor::zeros(&[seqs.len(), self.config.hidden()])))
        }
    }

    /// Forward pass in the mode carried by `ctx`.
    ///
    /// Masked texts are never encoded; a masked image is zeroed before the
    /// backbone.
    pub fn forward(&self, ctx: &mut Ctx<'_>, g: &mut Graph, batch: &Batch, mask: InputMask) -> Result<Forward> {
        mask.validate()?;
        let cfg = &self.config;
        let n = batch.len();
        if n == 0 {
            return Err(Error::Data("empty batch".into()));
        }
        if batch.image_text.len() != n {
            return Err(Error::shape(
                "forward",
                format!("{n} tweet texts but {} image texts", batch.image_text.len()),
            ));
        }
        let mut trace = Trace::default();
        if cfg.kind == ModelKind::Lstm {
            if !mask.tweet_text {
                return Err(Error::Config("the text-only model needs the tweet text input".into()));
            }
            let h = encode_text_batch(ctx, g, cfg.tweet_prefix(), &cfg.text, &batch.tweet)?;
            let logits = ctx.linear(g, "head.out", h)?;
            return Ok(Forward { logits, trace });
        }
        let images = batch
            .images
            .as_ref()
            .ok_or_else(|| Error::Data(format!("{} model needs images", cfg.kind)))?;
        if images.shape().first() != Some(&n) {
            return Err(Error::shape(
                "forward",
                format!("{n} texts but image batch {:?}", images.shape()),
            ));
        }
        let tt = self.encode(ctx, g, cfg.tweet_prefix(), mask.tweet_text, &batch.tweet)?;
        let it = self.encode(ctx, g, cfg.image_text_prefix(), mask.image_text, &batch.image_text)?;
        let image = g.constant(images.clone());
        let raw = ModalityNodes { image: Some(image), tweet_text: tt, image_text: it };
        let m = apply_input_mask(g, raw, mask)?;
        let vision = vision_features(ctx, g, "vision", &cfg.backbone, m.image.expect("image present"))?;
        trace.record("v_pool", vision.pooled);
        trace.record("v_map", vision.map);
        let logits = match cfg.kind {
            ModelKind::Fcm => fcm_forward(ctx, g, cfg, vision.pooled, m.tweet_text, m.image_text, &mut trace)?,
            ModelKind::Scm => scm_forward(ctx, g, cfg, vision.map, m.tweet_text, m.image_text, &mut trace)?,
            ModelKind::Tkm => tkm_forward(ctx, g, cfg, vision.map, m.tweet_text, m.image_text, &mut trace)?,
            ModelKind::Lstm => unreachable!(),
        };
        Ok(Forward { logits, trace })
    }
}
