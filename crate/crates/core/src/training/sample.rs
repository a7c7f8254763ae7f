use std::path::Path;

use crate::autodiff::{Mode, Tensor};
use crate::dataset::{aggregate_annotations, TweetRecord};
use crate::encoders::{load_image, preprocess_image, preprocess_tweet_text, Vocabulary};
use crate::error::{Error, Result};
use crate::fusion::{Batch, FusionModelConfig};

/// One labeled example in model-ready form.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    /// Decoded `[h, w, 3]` image before resizing and cropping.
    pub image: Option<Tensor>,
    pub tweet: Vec<usize>,
    pub image_text: Vec<usize>,
    /// 1 for hate.
    pub label: usize,
}

/// Turns records into samples: majority-vote labels, tokenized texts and
/// images loaded relative to `image_root`. Records without a usable label are
/// rejected.
pub fn samples_from_records(
    records: &[TweetRecord],
    vocab: &Vocabulary,
    image_root: &Path,
    min_duration: f64,
) -> Result<Vec<Sample>> {
    records
        .iter()
        .map(|r| {
            let agg = aggregate_annotations(&r.annotations, min_duration)
                .map_err(|e| Error::Data(format!("record `{}`: {e}", r.id)))?;
            let image = r
                .image_ref
                .as_ref()
                .map(|p| load_image(&image_root.join(p)))
                .transpose()?;
            Ok(Sample {
                id: r.id.clone(),
                image,
                tweet: vocab.encode(&preprocess_tweet_text(&r.tweet_text)),
                image_text: vocab.encode(&preprocess_tweet_text(&r.image_text)),
                label: agg.label.class(),
            })
        })
        .collect()
}

/// Per-class counts `[not hate, hate]`.
pub fn label_counts(samples: &[Sample]) -> [usize; 2] {
    let hate = samples.iter().filter(|s| s.label == 1).count();
    [samples.len() - hate, hate]
}

/// Stacks samples into a [`Batch`]. Images are preprocessed in `mode`; train
/// mode draws each crop from `seed` and the position in the batch.
pub fn collate(cfg: &FusionModelConfig, samples: &[&Sample], mode: Mode, seed: u64) -> Result<Batch> {
    let images = if cfg.kind.uses_image() {
        let geom = &cfg.backbone.geometry;
        let side = geom.input_side;
        let mut data = Vec::with_capacity(samples.len() * side * side * 3);
        for (i, s) in samples.iter().enumerate() {
            let img = s
                .image
                .as_ref()
                .ok_or_else(|| Error::Data(format!("sample `{}` has no image", s.id)))?;
            let crop_seed = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i as u64);
            data.extend_from_slice(preprocess_image(img, mode, geom, crop_seed)?.data());
        }
        Some(Tensor::new(vec![samples.len(), side, side, 3], data)?)
    } else {
        None
    };
    Ok(Batch {
        images,
        tweet: samples.iter().map(|s| s.tweet.clone()).collect(),
        image_text: samples.iter().map(|s| s.image_text.clone()).collect(),
    })
}

pub(crate) fn labels_tensor(samples: &[&Sample]) -> Tensor {
    Tensor::from_vec(samples.iter().map(|s| s.label as f64).collect())
}
