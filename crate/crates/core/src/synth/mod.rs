//! Synthetic multimodal corpora with planted text, image and cross-modal
//! signals.
//!
//! Each example carries two latent bits: `t`, shown as a signal token among
//! distractor tokens in the tweet text, and `v`, shown as a bright square
//! patch on a noise image. The image text is an independent distractor
//! stream. The label is a function of `(t, v)` chosen by [`SynthMode`].

mod spec;
mod render;

pub use render::{render_image, render_text, synth_vocabulary, SIGNAL_TOKEN};
pub use spec::{cell_weights, text_only_bayes_accuracy, image_only_bayes_accuracy, SynthMode, SynthSpec};

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Tensor;
use crate::dataset::{export_corpus, Category, Split, TweetRecord, WorkerAnnotation};
use crate::encoders::{preprocess_tweet_text, save_png, Vocabulary};
use crate::error::{Error, Result};
use crate::training::Sample;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthExample {
    pub id: String,
    pub image: Tensor,
    pub tweet_text: String,
    pub image_text: String,
    pub t: bool,
    pub v: bool,
    /// The mode's rule produced the clean label; otherwise the label is `t`.
    pub crossmodal: bool,
    /// Label after noise.
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub train: Vec<SynthExample>,
    pub val: Vec<SynthExample>,
    pub test: Vec<SynthExample>,
}

impl SynthCorpus {
    pub fn split(&self, split: Split) -> &[SynthExample] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

fn split_seed(seed: u64, split: Split) -> u64 {
    let tag = match split {
        Split::Train => 1u64,
        Split::Val => 2,
        Split::Test => 3,
    };
    seed ^ tag.wrapping_mul(0xa076_1d64_78bd_642f)
}

/// Splits `n` into integer counts proportional to `weights` (largest
/// remainder, earlier entries first on ties).
fn apportion(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| n as f64 * w / total).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .total_cmp(&(exact[a] - exact[a].floor()))
            .then(a.cmp(&b))
    });
    let short = n - counts.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

const CELLS: [(bool, bool); 4] = [(false, false), (false, true), (true, false), (true, true)];

/// Cell counts for `m` examples labeled by `rule`. Balanced groups get
/// exactly `m / 2` of each label, spread over that label's cells by weight.
fn group_counts(m: usize, weights: [f64; 4], rule: impl Fn(bool, bool) -> bool, balanced: bool) -> [usize; 4] {
    let mut counts = [0; 4];
    if !balanced {
        counts.copy_from_slice(&apportion(m, &weights));
        return counts;
    }
    for label in [false, true] {
        let members: Vec<usize> = (0..4).filter(|&k| rule(CELLS[k].0, CELLS[k].1) == label).collect();
        let w: Vec<f64> = members.iter().map(|&k| weights[k]).collect();
        for (&k, c) in members.iter().zip(apportion(m / 2, &w)) {
            counts[k] = c;
        }
    }
    counts
}

/// Latent cells `(t, v, crossmodal)` of one split, in generation order.
fn split_cells(spec: &SynthSpec, n: usize, mu: f64, rng: &mut ChaCha8Rng) -> Vec<(bool, bool, bool)> {
    let n_cross = 2 * (mu * n as f64 / 2.0).round() as usize;
    let w = cell_weights(spec.mode, spec.rebalance_and);
    let flat = [w[0][0], w[0][1], w[1][0], w[1][1]];
    let balanced = spec.mode != SynthMode::CrossmodalAnd || spec.rebalance_and;
    let cross = group_counts(n_cross, flat, |t, v| spec.mode.rule(t, v), balanced);
    let uni = group_counts(n - n_cross, [1.0; 4], |t, _| t, true);
    let mut out = Vec::with_capacity(n);
    for (k, &(t, v)) in CELLS.iter().enumerate() {
        out.extend(std::iter::repeat_n((t, v, true), cross[k]));
        out.extend(std::iter::repeat_n((t, v, false), uni[k]));
    }
    out.shuffle(rng);
    out
}

fn generate_split(spec: &SynthSpec, split: Split, n: usize) -> Vec<SynthExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed(spec.seed, split));
    let mu = if split == Split::Test { 1.0 } else { spec.multimodal_fraction };
    let cells = split_cells(spec, n, mu, &mut rng);
    let mut examples: Vec<SynthExample> = cells
        .into_iter()
        .enumerate()
        .map(|(i, (t, v, crossmodal))| {
            let label = if crossmodal { spec.mode.rule(t, v) } else { t };
            SynthExample {
                id: format!("{}-{i:05}", split.as_str()),
                image: render_image(spec.image_side, v, &mut rng),
                tweet_text: render_text(spec, Some(t), &mut rng),
                image_text: render_text(spec, None, &mut rng),
                t,
                v,
                crossmodal,
                label,
            }
        })
        .collect();
    // Same number of flips in each class keeps the split balanced.
    let mut flips = Vec::new();
    for class in [false, true] {
        let mut idx: Vec<usize> = (0..examples.len()).filter(|&i| examples[i].label == class).collect();
        idx.shuffle(&mut rng);
        let k = (spec.label_noise * idx.len() as f64).round() as usize;
        flips.extend_from_slice(&idx[..k]);
    }
    for i in flips {
        examples[i].label = !examples[i].label;
    }
    examples
}

/// Deterministic in `spec.seed`. The multimodal fraction applies to train
/// and val; every test example follows the mode's rule. Label noise applies
/// to all splits.
pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    Ok(SynthCorpus {
        train: generate_split(spec, Split::Train, spec.n_train),
        val: generate_split(spec, Split::Val, spec.n_val),
        test: generate_split(spec, Split::Test, spec.n_test),
    })
}

/// Model-ready samples encoded with `vocab`.
pub fn to_samples(examples: &[SynthExample], vocab: &Vocabulary) -> Vec<Sample> {
    examples
        .iter()
        .map(|e| Sample {
            id: e.id.clone(),
            image: Some(e.image.clone()),
            tweet: vocab.encode(&preprocess_tweet_text(&e.tweet_text)),
            image_text: vocab.encode(&preprocess_tweet_text(&e.image_text)),
            label: usize::from(e.label),
        })
        .collect()
}

/// Record form: three agreeing annotations of the label, image under
/// `images/<id>.png`.
pub fn to_record(e: &SynthExample) -> TweetRecord {
    let category = if e.label { Category::OtherHate } else { Category::NotHate };
    TweetRecord {
        id: e.id.clone(),
        tweet_text: e.tweet_text.clone(),
        is_retweet: false,
        image_ref: Some(format!("images/{}.png", e.id)),
        image_text: e.image_text.clone(),
        image_text_probability: None,
        annotations: (0..3)
            .map(|w| WorkerAnnotation {
                worker_id: format!("synth{w}"),
                category,
                duration_seconds: 10.0,
            })
            .collect(),
    }
}

/// Writes `train.jsonl`, `val.jsonl`, `test.jsonl`, `vocab.txt` and the PNG
/// images into `dir`.
pub fn write_corpus(dir: &Path, spec: &SynthSpec, corpus: &SynthCorpus) -> Result<()> {
    let images = dir.join("images");
    fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    for split in [Split::Train, Split::Val, Split::Test] {
        let examples = corpus.split(split);
        for e in examples {
            save_png(&images.join(format!("{}.png", e.id)), &e.image)?;
        }
        let records: Vec<TweetRecord> = examples.iter().map(to_record).collect();
        export_corpus(&dir.join(format!("{}.jsonl", split.as_str())), &records)?;
    }
    synth_vocabulary(spec).save(&dir.join("vocab.txt"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(mode: SynthMode) -> SynthSpec {
        SynthSpec {
            mode,
            n_train: 400,
            n_val: 40,
            n_test: 80,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn apportion_sums() {
        assert_eq!(apportion(10, &[1.0; 4]), vec![3, 3, 2, 2]);
        assert_eq!(apportion(6, &[0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0]), vec![3, 1, 1, 1]);
    }

    #[test]
    fn splits_are_balanced() {
        for mode in SynthMode::ALL {
            let c = generate(&spec(mode)).unwrap();
            for split in [&c.train, &c.val, &c.test] {
                let hate = split.iter().filter(|e| e.label).count();
                assert_eq!(2 * hate, split.len(), "{mode}");
            }
        }
    }

    #[test]
    fn labels_follow_rule_without_noise() {
        let c = generate(&spec(SynthMode::CrossmodalXor)).unwrap();
        assert!(c.test.iter().all(|e| e.crossmodal && e.label == (e.t ^ e.v)));
    }

    #[test]
    fn same_seed_same_corpus() {
        let s = spec(SynthMode::CrossmodalAnd);
        assert_eq!(generate(&s).unwrap(), generate(&s).unwrap());
        let other = SynthSpec { seed: 9, ..s.clone() };
        assert_ne!(generate(&s).unwrap().train, generate(&other).unwrap().train);
    }

    #[test]
    fn multimodal_fraction_counts_train_only() {
        let s = SynthSpec { multimodal_fraction: 0.25, ..spec(SynthMode::CrossmodalXor) };
        let c = generate(&s).unwrap();
        assert_eq!(c.train.iter().filter(|e| e.crossmodal).count(), 100);
        assert!(c.train.iter().filter(|e| !e.crossmodal).all(|e| e.label == e.t));
        assert!(c.test.iter().all(|e| e.crossmodal));
    }

    #[test]
    fn noise_flips_equal_counts_per_class() {
        let s = SynthSpec { label_noise: 0.2, ..spec(SynthMode::UnimodalText) };
        let c = generate(&s).unwrap();
        let wrong = c.train.iter().filter(|e| e.label != e.t).count();
        assert_eq!(wrong, 80);
        assert_eq!(c.train.iter().filter(|e| e.label).count(), 200);
    }

    #[test]
    fn signal_token_marks_t() {
        let c = generate(&spec(SynthMode::UnimodalText)).unwrap();
        for e in &c.train {
            assert_eq!(e.tweet_text.split(' ').any(|w| w == SIGNAL_TOKEN), e.t);
            assert!(!e.image_text.split(' ').any(|w| w == SIGNAL_TOKEN));
        }
    }

    #[test]
    fn written_corpus_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let s = SynthSpec { n_train: 8, n_val: 4, n_test: 4, ..spec(SynthMode::CrossmodalXor) };
        let c = generate(&s).unwrap();
        write_corpus(dir.path(), &s, &c).unwrap();
        let vocab = Vocabulary::load(&dir.path().join("vocab.txt")).unwrap();
        let report = crate::dataset::import_corpus(&dir.path().join("train.jsonl")).unwrap();
        assert!(report.diagnostics.is_empty());
        let loaded = crate::training::samples_from_records(&report.records, &vocab, dir.path(), 3.0).unwrap();
        assert_eq!(loaded, to_samples(&c.train, &vocab));
    }
}
