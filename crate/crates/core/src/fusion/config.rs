use std::fmt;
use std::str::FromStr;

use crate::encoders::{TextEncoderConfig, VisionBackboneConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Tweet text only: LSTM and a linear head.
    Lstm,
    /// Feature concatenation.
    Fcm,
    /// Spatial concatenation.
    Scm,
    /// Textual kernels.
    Tkm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Lstm, ModelKind::Fcm, ModelKind::Scm, ModelKind::Tkm];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Lstm => "lstm",
            ModelKind::Fcm => "fcm",
            ModelKind::Scm => "scm",
            ModelKind::Tkm => "tkm",
        }
    }

    pub fn uses_image(self) -> bool {
        self != ModelKind::Lstm
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown model variant `{s}` (lstm|fcm|scm|tkm)")))
    }
}

/// Which inputs are available. Unavailable inputs are replaced by zeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct InputMask {
    pub tweet_text: bool,
    pub image_text: bool,
    pub image: bool,
}

impl InputMask {
    pub const ALL: Self = Self { tweet_text: true, image_text: true, image: true };
    pub const TT: Self = Self { tweet_text: true, image_text: false, image: false };
    pub const TT_IT: Self = Self { tweet_text: true, image_text: true, image: false };
    pub const I: Self = Self { tweet_text: false, image_text: false, image: true };

    /// The four input combinations compared in the ablation.
    pub const ABLATION: [Self; 4] = [Self::TT, Self::TT_IT, Self::I, Self::ALL];

    pub fn validate(&self) -> Result<()> {
        if !(self.tweet_text || self.image_text || self.image) {
            return Err(Error::Config("input mask disables every input".into()));
        }
        Ok(())
    }
}

impl fmt::Display for InputMask {
    /// Comma-separated list such as `TT,IT,I`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = [(self.tweet_text, "TT"), (self.image_text, "IT"), (self.image, "I")]
            .into_iter()
            .filter_map(|(on, name)| on.then_some(name))
            .collect();
        if parts.is_empty() {
            f.write_str("-")
        } else {
            f.write_str(&parts.join(","))
        }
    }
}

impl FromStr for InputMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut m = InputMask { tweet_text: false, image_text: false, image: false };
        for part in s.split([',', '+']).map(str::trim).filter(|p| !p.is_empty()) {
            match part.to_ascii_uppercase().as_str() {
                "TT" => m.tweet_text = true,
                "IT" => m.image_text = true,
                "I" => m.image = true,
                other => return Err(Error::Config(format!("unknown input `{other}` (TT|IT|I)"))),
            }
        }
        m.validate()?;
        Ok(m)
    }
}

/// Architecture hyperparameters of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionModelConfig {
    pub kind: ModelKind,
    pub text: TextEncoderConfig,
    pub backbone: VisionBackboneConfig,
    /// Kernels generated from the tweet text (TKM).
    pub k_t: usize,
    /// Kernels generated from the image text (TKM).
    pub k_it: usize,
    /// Hidden widths of the fully connected head; the output layer (2) is implicit.
    pub fc_hidden: Vec<usize>,
    /// Output channels of each fusion conv block (SCM, TKM).
    pub block_channels: usize,
    pub block_count: usize,
    pub dropout_rate: f64,
    /// Tweet text and image text share one LSTM.
    pub shared_text_encoder: bool,
}

impl FusionModelConfig {
    /// Desk scale: 56×56 images, 4×4×64 map, `K_t = 4`, `K_it = 2`,
    /// head 128 → 64 → 2.
    pub fn desk(kind: ModelKind, vocab_size: usize) -> Self {
        Self {
            kind,
            text: TextEncoderConfig::paper(vocab_size),
            backbone: VisionBackboneConfig::desk(),
            k_t: 4,
            k_it: 2,
            fc_hidden: vec![128, 64],
            block_channels: 64,
            block_count: 2,
            dropout_rate: 0.5,
            shared_text_encoder: true,
        }
    }

    /// Profile for synthetic-corpus experiments: `side`-pixel images through
    /// two halving stages (8, 16 channels), 16-d text, `K_t = 4`, `K_it = 2`,
    /// head 32 → 16 → 2.
    pub fn synth(kind: ModelKind, vocab_size: usize, side: usize) -> Self {
        Self {
            kind,
            text: TextEncoderConfig {
                embedding_dim: 16,
                hidden_dim: 16,
                vocab_size,
            },
            backbone: VisionBackboneConfig::halving(side, side, &[8, 16]),
            k_t: 4,
            k_it: 2,
            fc_hidden: vec![32, 16],
            block_channels: 16,
            block_count: 2,
            dropout_rate: 0.5,
            shared_text_encoder: true,
        }
    }

    /// Full-size dimensions: 8×8×2048 map, 150-d text, `K_t = 10`, `K_it = 5`,
    /// head 1024 → 512 → 2.
    pub fn paper(kind: ModelKind, vocab_size: usize) -> Self {
        Self {
            kind,
            text: TextEncoderConfig::paper(vocab_size),
            backbone: VisionBackboneConfig::paper(),
            k_t: 10,
            k_it: 5,
            fc_hidden: vec![1024, 512],
            block_channels: 2048,
            block_count: 2,
            dropout_rate: 0.5,
            shared_text_encoder: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.text.validate()?;
        self.backbone.validate()?;
        if self.kind == ModelKind::Tkm && (self.k_t == 0 || self.k_it == 0) {
            return Err(Error::Config("TKM needs k_t >= 1 and k_it >= 1".into()));
        }
        if self.fc_hidden.contains(&0) {
            return Err(Error::Config("fc widths must be positive".into()));
        }
        if matches!(self.kind, ModelKind::Scm | ModelKind::Tkm) && (self.block_count == 0 || self.block_channels == 0) {
            return Err(Error::Config("SCM and TKM need at least one fusion block".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout rate {} not in [0, 1)", self.dropout_rate)));
        }
        Ok(())
    }

    pub fn d_v(&self) -> usize {
        self.backbone.map_channels()
    }

    pub fn map_side(&self) -> usize {
        self.backbone.map_side()
    }

    pub fn hidden(&self) -> usize {
        self.text.hidden_dim
    }

    pub fn tweet_prefix(&self) -> &'static str {
        if self.shared_text_encoder { "text" } else { "tweet_text" }
    }

    pub fn image_text_prefix(&self) -> &'static str {
        if self.shared_text_encoder { "text" } else { "image_text" }
    }

    pub fn shapes(&self) -> FusionShapes {
        FusionShapes::of(self)
    }
}

/// Closed-form intermediate shapes, per example (batch axis omitted).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FusionShapes {
    /// FCM concatenated vector: `D_v + 2H`.
    pub concat_len: usize,
    /// TKM map after the dynamic convolution: `[s, s, K_t + K_it]`.
    pub multimodal_map: [usize; 3],
    /// TKM map after tiling both texts: `[s, s, K_t + K_it + 2H]`.
    pub tkm_fused_map: [usize; 3],
    /// SCM map after tiling both texts: `[s, s, D_v + 2H]`.
    pub scm_fused_map: [usize; 3],
    /// Fully connected plan including input and the two logits.
    pub fc_plan: Vec<usize>,
}

impl FusionShapes {
    pub fn of(cfg: &FusionModelConfig) -> Self {
        let (s, d, h) = (cfg.map_side(), cfg.d_v(), cfg.hidden());
        let k = cfg.k_t + cfg.k_it;
        let head_in = match cfg.kind {
            ModelKind::Lstm => h,
            ModelKind::Fcm => d + 2 * h,
            ModelKind::Scm | ModelKind::Tkm => cfg.block_channels,
        };
        let mut fc_plan = vec![head_in];
        if cfg.kind != ModelKind::Lstm {
            fc_plan.extend(&cfg.fc_hidden);
        }
        fc_plan.push(2);
        Self {
            concat_len: d + 2 * h,
            multimodal_map: [s, s, k],
            tkm_fused_map: [s, s, k + 2 * h],
            scm_fused_map: [s, s, d + 2 * h],
            fc_plan,
        }
    }
}
