use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::sample::{collate, label_counts, labels_tensor, Sample};
use super::weights::ClassWeightMode;
use crate::autodiff::{adam_step, AdamState, Graph, Mode, ParamStore, DEFAULT_LR};
use crate::error::{Error, Result};
use crate::evaluation::{auc_roc, score_dataset};
use crate::fusion::{FusionModel, InputMask};
use crate::layers::Ctx;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub mask: InputMask,
    pub class_weights: ClassWeightMode,
    /// Validate every this many steps, and always at the end of an epoch.
    /// 0 validates at epoch ends only.
    pub eval_every: usize,
    /// Random crops and mirroring of training images.
    pub augment: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: DEFAULT_LR,
            batch_size: 32,
            epochs: 1,
            seed: 0,
            mask: InputMask::ALL,
            class_weights: ClassWeightMode::Balanced,
            eval_every: 0,
            augment: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epoch count must be at least 1".into()));
        }
        self.mask.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRecord {
    /// Number of steps taken when the validation ran.
    pub step: usize,
    pub val_auc: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub steps: Vec<StepRecord>,
    pub evals: Vec<EvalRecord>,
    pub wall_clock_seconds: f64,
}

impl TrainHistory {
    /// CSV `step,loss,val_auc`, one row per step; `val_auc` is filled on the
    /// step after which a validation ran.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let err = |e: csv::Error| Error::Data(format!("writing history: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "loss", "val_auc"]).map_err(err)?;
        for s in &self.steps {
            let auc = self
                .evals
                .iter()
                .find(|e| e.step == s.step + 1)
                .map_or(String::new(), |e| e.val_auc.to_string());
            w.write_record([s.step.to_string(), s.loss.to_string(), auc]).map_err(err)?;
        }
        w.flush().map_err(|e| Error::Data(format!("writing history: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub step: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Best-validation-AUC parameters, or the final ones without validation
    /// data, or the last finite ones after a divergence.
    pub params: ParamStore,
    pub history: TrainHistory,
    pub best: Option<EvalRecord>,
    pub diverged: Option<Divergence>,
}

fn step_seed(seed: u64, step: usize) -> u64 {
    seed ^ (step as u64 + 1).wrapping_mul(0xd1b5_4a32_d192_ed03)
}

/// Mini-batch ADAM on class-weighted softmax cross-entropy.
///
/// Batches follow a seeded shuffle per epoch and every random choice derives
/// from `cfg.seed`, so equal inputs give bitwise-equal outcomes.
pub fn train(
    model: &FusionModel,
    init: ParamStore,
    train_set: &[Sample],
    val_set: &[Sample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Data("training split is empty".into()));
    }
    let weights = cfg.class_weights.weights(&label_counts(train_set))?;
    let start = Instant::now();
    let mut params = init;
    let mut adam = AdamState::new(cfg.lr);
    let mut history = TrainHistory::default();
    let mut best: Option<(EvalRecord, ParamStore)> = None;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut step = 0;
    let image_mode = if cfg.augment { Mode::Train } else { Mode::Eval };

    let mut validate = |params: &ParamStore, step: usize, history: &mut TrainHistory| -> Result<()> {
        if val_set.is_empty() || history.evals.last().is_some_and(|e| e.step == step) {
            return Ok(());
        }
        let scored = score_dataset(model, params, val_set, cfg.mask, cfg.batch_size)?;
        let record = EvalRecord { step, val_auc: auc_roc(&scored)? };
        history.evals.push(record);
        if best.as_ref().is_none_or(|(b, _)| record.val_auc > b.val_auc) {
            best = Some((record, params.clone()));
        }
        Ok(())
    };

    for _epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let members: Vec<&Sample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let seed = step_seed(cfg.seed, step);
            let batch = collate(&model.config, &members, image_mode, seed)?;
            let mut g = Graph::new(seed);
            let mut ctx = Ctx::new(&params, Mode::Train, model.config.dropout_rate);
            let out = model.forward(&mut ctx, &mut g, &batch, cfg.mask)?;
            let labels = g.constant(labels_tensor(&members));
            let loss = g.weighted_cross_entropy(out.logits, labels, &weights)?;
            let loss_value = g.value(loss).item();
            if !loss_value.is_finite() {
                history.wall_clock_seconds = start.elapsed().as_secs_f64();
                return Ok(TrainOutcome {
                    params,
                    history,
                    best: None,
                    diverged: Some(Divergence {
                        step,
                        message: format!("loss became {loss_value} at step {step}"),
                    }),
                });
            }
            g.backward(loss)?;
            let grads = ctx.binder.gradients(&g);
            let stats = ctx.batch_stats(&g);
            drop(ctx);
            let previous = params.clone();
            adam_step(&mut params, &grads, &mut adam)?;
            stats.fold_into(&mut params)?;
            if !params.all_finite() {
                history.wall_clock_seconds = start.elapsed().as_secs_f64();
                return Ok(TrainOutcome {
                    params: previous,
                    history,
                    best: None,
                    diverged: Some(Divergence {
                        step,
                        message: format!("parameters became non-finite at step {step}"),
                    }),
                });
            }
            history.steps.push(StepRecord { step, loss: loss_value });
            step += 1;
            if cfg.eval_every > 0 && step % cfg.eval_every == 0 {
                validate(&params, step, &mut history)?;
            }
        }
        validate(&params, step, &mut history)?;
    }
    history.wall_clock_seconds = start.elapsed().as_secs_f64();
    let (best, params) = match best {
        Some((record, p)) => (Some(record), p),
        None => (None, params),
    };
    Ok(TrainOutcome {
        params,
        history,
        best,
        diverged: None,
    })
}
