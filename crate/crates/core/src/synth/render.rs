use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::spec::SynthSpec;
use crate::autodiff::Tensor;
use crate::encoders::Vocabulary;

/// Token marking `t = 1` in a tweet text.
pub const SIGNAL_TOKEN: &str = "signal";

const BACKGROUND_MEAN: f64 = 0.5;
const BACKGROUND_STD: f64 = 0.1;

fn distractor(k: usize) -> String {
    format!("w{k}")
}

/// `text_len` distractor words; with `Some(true)` one of them, at a random
/// position, is replaced by [`SIGNAL_TOKEN`].
pub fn render_text(spec: &SynthSpec, signal: Option<bool>, rng: &mut ChaCha8Rng) -> String {
    let mut words: Vec<String> = (0..spec.text_len)
        .map(|_| distractor(rng.random_range(0..spec.vocab_size)))
        .collect();
    if signal == Some(true) {
        let at = rng.random_range(0..words.len());
        words[at] = SIGNAL_TOKEN.to_string();
    }
    words.join(" ")
}

/// Gaussian noise clipped to `[0, 1]`; with `patch`, a square of ones with
/// side `side / 4` at a random position. Values are quantized to multiples
/// of 1/255 so the image survives an 8-bit PNG round trip unchanged.
pub fn render_image(side: usize, patch: bool, rng: &mut ChaCha8Rng) -> Tensor {
    let noise = Normal::new(BACKGROUND_MEAN, BACKGROUND_STD).expect("valid normal");
    let mut data: Vec<f64> = (0..side * side * 3)
        .map(|_| (noise.sample(rng).clamp(0.0, 1.0) * 255.0).round() / 255.0)
        .collect();
    if patch {
        let p = (side / 4).max(1);
        let top = rng.random_range(0..=side - p);
        let left = rng.random_range(0..=side - p);
        for y in top..top + p {
            for x in left..left + p {
                data[(y * side + x) * 3..(y * side + x + 1) * 3].fill(1.0);
            }
        }
    }
    Tensor::new(vec![side, side, 3], data).expect("shape matches data")
}

/// Special tokens, the signal token and every distractor word.
pub fn synth_vocabulary(spec: &SynthSpec) -> Vocabulary {
    let mut v = Vocabulary::new();
    v.add(SIGNAL_TOKEN);
    for k in 0..spec.vocab_size {
        v.add(&distractor(k));
    }
    v
}
