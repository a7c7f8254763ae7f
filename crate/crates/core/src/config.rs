//! Flat `key = value` configuration with dotted namespaces.
//!
//! Every recognized key has a default, so a resolved [`Config`] lists the
//! complete set of settings a run used. An empty value means "derived":
//! profile defaults for model dimensions, the global `seed` for per-stage seeds.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::dataset::FilterRuleSet;
use crate::encoders::VisionBackboneConfig;
use crate::error::{Error, Result};
use crate::fusion::{FusionModelConfig, InputMask, ModelKind};
use crate::synth::{SynthMode, SynthSpec};
use crate::training::{ClassWeightMode, TrainConfig};

/// Environment variable consulted for `seed` when neither file nor overrides set it.
pub const SEED_ENV: &str = "MFUSE_SEED";

/// `(key, default, description)` of every recognized key.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("seed", "0", "global seed; per-stage seeds default to it"),
    ("model.variant", "tkm", "lstm | fcm | scm | tkm"),
    ("model.profile", "desk", "desk | paper | synth"),
    ("model.image_side", "16", "image side of the synth profile"),
    ("model.k_t", "", "tweet-text kernels"),
    ("model.k_it", "", "image-text kernels"),
    ("model.embedding_dim", "", "word embedding size"),
    ("model.hidden_dim", "", "LSTM hidden size"),
    ("model.fc_hidden", "", "comma-separated head widths"),
    ("model.block_channels", "", "fusion conv block channels"),
    ("model.block_count", "", "fusion conv blocks"),
    ("model.backbone_channels", "", "comma-separated stride-2 stage channels"),
    ("model.input_side", "", "backbone crop side"),
    ("model.resize_shortest", "", "shortest image side before cropping"),
    ("model.dropout", "", "dropout rate before the head"),
    ("model.shared_text_encoder", "", "one LSTM for both texts"),
    ("model.embeddings", "", "word vectors file (token v1 v2 ...)"),
    ("model.init_checkpoint", "", "checkpoint whose matching parameters seed the model"),
    ("train.lr", "0.0001", "ADAM learning rate"),
    ("train.batch_size", "32", "examples per step"),
    ("train.epochs", "1", "passes over the training split"),
    ("train.seed", "", "shuffling, dropout and init seed"),
    ("train.inputs", "TT,IT,I", "available inputs"),
    ("train.class_weights", "balanced", "balanced | uniform"),
    ("train.eval_every", "0", "validate every N steps (0: per epoch)"),
    ("train.augment", "true", "random crops and mirroring"),
    ("data.dir", "", "prepared corpus directory"),
    ("data.min_duration", "3", "annotations faster than this (s) are dropped"),
    ("synth.mode", "crossmodal_xor", "unimodal_text | unimodal_image | crossmodal_and | crossmodal_xor"),
    ("synth.n_train", "8000", "training examples"),
    ("synth.n_val", "1000", "validation examples"),
    ("synth.n_test", "2000", "test examples"),
    ("synth.noise", "0", "label noise rate"),
    ("synth.multimodal_fraction", "1", "fraction of train/val labeled by the cross-modal rule"),
    ("synth.image_side", "16", "image side in pixels"),
    ("synth.vocab_size", "50", "distractor words"),
    ("synth.text_len", "6", "tokens per text"),
    ("synth.rebalance_and", "true", "50/50 labels in and-mode"),
    ("synth.seed", "", "generator seed"),
    ("prepare.input", "", "raw corpus (JSON lines)"),
    ("prepare.banned_terms", "", "term list file"),
    ("prepare.keywords", "", "keyword list file for hate-rate statistics"),
    ("prepare.min_word_count", "3", "shorter tweets are discarded"),
    ("prepare.text_threshold", "0.3", "images with more text probability are discarded"),
    ("prepare.val_size", "0", "balanced validation size"),
    ("prepare.test_size", "0", "balanced test size"),
    ("prepare.min_vocab_count", "1", "minimum training-split frequency of a vocabulary word"),
    ("prepare.seed", "", "split seed"),
    ("eval.checkpoint", "", "checkpoint to evaluate"),
    ("eval.split", "test", "train | val | test"),
    ("eval.batch_size", "64", "examples per forward pass"),
    ("eval.name", "", "model name in tables (default: variant)"),
    ("report.runs", "", "comma-separated eval output directories"),
    ("report.random_n", "0", "add a random-score row over this many balanced examples"),
    ("gradcheck.eps", "1e-5", "finite-difference step"),
    ("gradcheck.tolerance", "1e-4", "maximum relative error"),
    ("gradcheck.draws", "100", "random draws per primitive"),
    ("gradcheck.per_tensor", "8", "coordinates checked per model parameter"),
];

fn default_of(key: &str) -> Option<&'static str> {
    KEYS.iter().find(|(k, _, _)| *k == key).map(|&(_, d, _)| d)
}

/// A complete key → value map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            values: KEYS.iter().map(|&(k, d, _)| (k.to_string(), d.to_string())).collect(),
        }
    }
}

impl fmt::Display for Config {
    /// File form, one `key = value` per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.values {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

fn split_pair(s: &str) -> Option<(&str, &str)> {
    let (k, v) = s.split_once('=')?;
    Some((k.trim(), v.trim()))
}

impl Config {
    /// Parses file text. `#` starts a comment line; keys may not repeat.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = split_pair(line)
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            if !seen.insert(k.to_string()) {
                return Err(Error::Config(format!("line {}: `{k}` set twice", i + 1)));
            }
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if default_of(key).is_none() {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let (k, v) = split_pair(o.as_ref())
                .ok_or_else(|| Error::Config(format!("override `{}` is not key=value", o.as_ref())))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    /// File (if any), then overrides. `seed` falls back to [`SEED_ENV`] when
    /// neither sets it.
    pub fn from_sources<S: AsRef<str>>(file: Option<&Path>, overrides: &[S]) -> Result<Self> {
        let text = match file {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        let mut cfg = Self::parse(&text)?;
        let from_file = text
            .lines()
            .filter(|l| !l.trim_start().starts_with('#'))
            .filter_map(split_pair)
            .any(|(k, _)| k == "seed");
        cfg.apply_overrides(overrides)?;
        let overridden = overrides
            .iter()
            .filter_map(|o| split_pair(o.as_ref()))
            .any(|(k, _)| k == "seed");
        if !from_file && !overridden {
            if let Ok(v) = std::env::var(SEED_ENV) {
                cfg.set("seed", v.trim())?;
            }
        }
        cfg.seed()?;
        Ok(cfg)
    }

    pub fn get(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("`{key}` is not a recognized key"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn parse_value<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        let raw = self.get(key);
        raw.parse()
            .map_err(|e| Error::Config(format!("`{key} = {raw}`: {e}")))
    }

    /// `None` for an empty value.
    pub fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        if self.get(key).is_empty() {
            Ok(None)
        } else {
            self.parse_value(key).map(Some)
        }
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(Error::Config(format!("`{key} = {other}`: expected true or false"))),
        }
    }

    fn optional_list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        let raw = self.get(key);
        if raw.is_empty() {
            return Ok(None);
        }
        raw.split(',')
            .map(|p| {
                p.trim()
                    .parse()
                    .map_err(|e| Error::Config(format!("`{key} = {raw}`: {e}")))
            })
            .collect::<Result<Vec<usize>>>()
            .map(Some)
    }

    pub fn path(&self, key: &str) -> Option<&Path> {
        let raw = self.get(key);
        (!raw.is_empty()).then(|| Path::new(raw))
    }

    pub fn require_path(&self, key: &str) -> Result<&Path> {
        self.path(key)
            .ok_or_else(|| Error::Config(format!("`{key}` must be set")))
    }

    pub fn seed(&self) -> Result<u64> {
        self.parse_value("seed")
    }

    /// A stage seed such as `train.seed`, falling back to `seed`.
    pub fn stage_seed(&self, key: &str) -> Result<u64> {
        match self.optional(key)? {
            Some(s) => Ok(s),
            None => self.seed(),
        }
    }

    pub fn model_config(&self, vocab_size: usize) -> Result<FusionModelConfig> {
        let kind: ModelKind = self.parse_value("model.variant")?;
        let mut m = match self.get("model.profile") {
            "desk" => FusionModelConfig::desk(kind, vocab_size),
            "paper" => FusionModelConfig::paper(kind, vocab_size),
            "synth" => FusionModelConfig::synth(kind, vocab_size, self.parse_value("model.image_side")?),
            other => return Err(Error::Config(format!("unknown model profile `{other}` (desk|paper|synth)"))),
        };
        if let Some(v) = self.optional("model.k_t")? {
            m.k_t = v;
        }
        if let Some(v) = self.optional("model.k_it")? {
            m.k_it = v;
        }
        if let Some(v) = self.optional("model.embedding_dim")? {
            m.text.embedding_dim = v;
        }
        if let Some(v) = self.optional("model.hidden_dim")? {
            m.text.hidden_dim = v;
        }
        if let Some(v) = self.optional_list("model.fc_hidden")? {
            m.fc_hidden = v;
        }
        if let Some(v) = self.optional("model.block_channels")? {
            m.block_channels = v;
        }
        if let Some(v) = self.optional("model.block_count")? {
            m.block_count = v;
        }
        let channels = self.optional_list("model.backbone_channels")?;
        let side = self.optional("model.input_side")?;
        let resize = self.optional("model.resize_shortest")?;
        if channels.is_some() || side.is_some() || resize.is_some() {
            let g = m.backbone.geometry;
            let side = side.unwrap_or(g.input_side);
            let channels = channels.unwrap_or_else(|| m.backbone.stages.iter().map(|s| s.channels).collect());
            m.backbone = VisionBackboneConfig::halving(resize.unwrap_or(g.resize_shortest.max(side)), side, &channels);
        }
        if let Some(v) = self.optional("model.dropout")? {
            m.dropout_rate = v;
        }
        if !self.get("model.shared_text_encoder").is_empty() {
            m.shared_text_encoder = self.flag("model.shared_text_encoder")?;
        }
        m.validate()?;
        Ok(m)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            lr: self.parse_value("train.lr")?,
            batch_size: self.parse_value("train.batch_size")?,
            epochs: self.parse_value("train.epochs")?,
            seed: self.stage_seed("train.seed")?,
            mask: self.parse_value::<InputMask>("train.inputs")?,
            class_weights: self.parse_value::<ClassWeightMode>("train.class_weights")?,
            eval_every: self.parse_value("train.eval_every")?,
            augment: self.flag("train.augment")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn synth_spec(&self) -> Result<SynthSpec> {
        let spec = SynthSpec {
            mode: self.parse_value::<SynthMode>("synth.mode")?,
            n_train: self.parse_value("synth.n_train")?,
            n_val: self.parse_value("synth.n_val")?,
            n_test: self.parse_value("synth.n_test")?,
            label_noise: self.parse_value("synth.noise")?,
            multimodal_fraction: self.parse_value("synth.multimodal_fraction")?,
            image_side: self.parse_value("synth.image_side")?,
            vocab_size: self.parse_value("synth.vocab_size")?,
            text_len: self.parse_value("synth.text_len")?,
            rebalance_and: self.flag("synth.rebalance_and")?,
            seed: self.stage_seed("synth.seed")?,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Filter rules; term files are read relative to the working directory.
    pub fn filter_rules(&self) -> Result<FilterRuleSet> {
        let read_terms = |key: &str| -> Result<Vec<String>> {
            match self.path(key) {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                    Ok(FilterRuleSet::parse_term_list(&text))
                }
                None => Ok(Vec::new()),
            }
        };
        let rules = FilterRuleSet {
            min_word_count: self.parse_value("prepare.min_word_count")?,
            banned_terms: read_terms("prepare.banned_terms")?,
            keyword_list: read_terms("prepare.keywords")?,
            text_probability_threshold: self.parse_value("prepare.text_threshold")?,
        };
        rules.validate()?;
        Ok(rules)
    }

    pub fn min_duration(&self) -> Result<f64> {
        self.parse_value("data.min_duration")
    }
}
