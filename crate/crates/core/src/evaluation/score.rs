use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::metrics::ScoredExample;
use crate::autodiff::{Graph, Mode, ParamStore};
use crate::error::{Error, Result};
use crate::fusion::{FusionModel, InputMask};
use crate::layers::Ctx;
use crate::training::{collate, Sample};

/// Eval-mode hate probabilities, `softmax(logits)[1]`, in input order.
pub fn score_dataset(
    model: &FusionModel,
    params: &ParamStore,
    samples: &[Sample],
    mask: InputMask,
    batch_size: usize,
) -> Result<Vec<ScoredExample>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(batch_size) {
        let members: Vec<&Sample> = chunk.iter().collect();
        let batch = collate(&model.config, &members, Mode::Eval, 0)?;
        let mut g = Graph::new(0);
        let mut ctx = Ctx::new(params, Mode::Eval, model.config.dropout_rate);
        let fwd = model.forward(&mut ctx, &mut g, &batch, mask)?;
        let probs = g.softmax(fwd.logits)?;
        for (s, row) in chunk.iter().zip(g.value(probs).data().chunks(2)) {
            out.push(ScoredExample::new(s.id.clone(), row[1], s.label == 1));
        }
    }
    Ok(out)
}

/// Uniform `[0, 1)` scores on `n` examples, the first half labeled hate.
pub fn random_scores(n: usize, seed: u64) -> Result<Vec<ScoredExample>> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::Config(format!("random baseline needs an even size of at least 2, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|i| ScoredExample::new(format!("random-{i}"), rng.random::<f64>(), i < n / 2))
        .collect())
}
