use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SynthMode {
    /// label = t
    UnimodalText,
    /// label = v
    UnimodalImage,
    /// label = t ∧ v
    CrossmodalAnd,
    /// label = t ⊕ v
    CrossmodalXor,
}

impl SynthMode {
    pub const ALL: [SynthMode; 4] = [
        SynthMode::UnimodalText,
        SynthMode::UnimodalImage,
        SynthMode::CrossmodalAnd,
        SynthMode::CrossmodalXor,
    ];

    pub fn rule(self, t: bool, v: bool) -> bool {
        match self {
            SynthMode::UnimodalText => t,
            SynthMode::UnimodalImage => v,
            SynthMode::CrossmodalAnd => t && v,
            SynthMode::CrossmodalXor => t ^ v,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SynthMode::UnimodalText => "unimodal_text",
            SynthMode::UnimodalImage => "unimodal_image",
            SynthMode::CrossmodalAnd => "crossmodal_and",
            SynthMode::CrossmodalXor => "crossmodal_xor",
        }
    }
}

impl fmt::Display for SynthMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SynthMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SynthMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown synth mode `{s}` (unimodal_text|unimodal_image|crossmodal_and|crossmodal_xor)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub mode: SynthMode,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// Fraction of labels flipped in every split, equally in both classes.
    pub label_noise: f64,
    /// Fraction of train and val examples labeled by the mode's rule; the
    /// rest are labeled by `t`.
    pub multimodal_fraction: f64,
    pub image_side: usize,
    /// Number of distractor words.
    pub vocab_size: usize,
    /// Tokens per text.
    pub text_len: usize,
    /// Weight the and-mode cells so labels are 50/50. Without it, cells are
    /// uniform and three quarters of the labels are 0.
    pub rebalance_and: bool,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            mode: SynthMode::CrossmodalXor,
            n_train: 8000,
            n_val: 1000,
            n_test: 2000,
            label_noise: 0.0,
            multimodal_fraction: 1.0,
            image_side: 16,
            vocab_size: 50,
            text_len: 6,
            rebalance_and: true,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, n) in [("n_train", self.n_train), ("n_val", self.n_val), ("n_test", self.n_test)] {
            if n % 2 != 0 {
                return Err(Error::Config(format!("{name} = {n} must be even to be balanced")));
            }
        }
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::Config("n_train and n_test must be positive".into()));
        }
        if !(0.0..0.5).contains(&self.label_noise) {
            return Err(Error::Config(format!("label noise {} not in [0, 0.5)", self.label_noise)));
        }
        if !(self.multimodal_fraction > 0.0 && self.multimodal_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "multimodal fraction {} not in (0, 1]",
                self.multimodal_fraction
            )));
        }
        if self.image_side < 4 {
            return Err(Error::Config(format!("image side {} below 4", self.image_side)));
        }
        if self.vocab_size == 0 || self.text_len == 0 {
            return Err(Error::Config("vocab_size and text_len must be positive".into()));
        }
        Ok(())
    }
}

/// Probability of each `(t, v)` cell, indexed `[t][v]`, for examples the
/// mode's rule labels. Rebalanced and-mode puts ½ on `(1, 1)` and ⅙ on each
/// other cell.
pub fn cell_weights(mode: SynthMode, rebalance_and: bool) -> [[f64; 2]; 2] {
    if mode == SynthMode::CrossmodalAnd && rebalance_and {
        [[1.0 / 6.0, 1.0 / 6.0], [1.0 / 6.0, 0.5]]
    } else {
        [[0.25; 2]; 2]
    }
}

fn bayes_accuracy(mode: SynthMode, rebalance_and: bool, by_t: bool) -> f64 {
    let w = cell_weights(mode, rebalance_and);
    (0..2)
        .map(|observed| {
            let mut mass = [0.0; 2];
            for other in 0..2 {
                let (t, v) = if by_t { (observed, other) } else { (other, observed) };
                mass[usize::from(mode.rule(t == 1, v == 1))] += w[t][v];
            }
            mass[0].max(mass[1])
        })
        .sum()
}

/// Best accuracy of any classifier that sees only `t`, noise-free, all
/// examples following the rule.
pub fn text_only_bayes_accuracy(mode: SynthMode, rebalance_and: bool) -> f64 {
    bayes_accuracy(mode, rebalance_and, true)
}

/// Best accuracy of any classifier that sees only `v`.
pub fn image_only_bayes_accuracy(mode: SynthMode, rebalance_and: bool) -> f64 {
    bayes_accuracy(mode, rebalance_and, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bayes_accuracies() {
        assert_eq!(text_only_bayes_accuracy(SynthMode::CrossmodalXor, true), 0.5);
        assert_eq!(text_only_bayes_accuracy(SynthMode::CrossmodalAnd, false), 0.75);
        assert!((text_only_bayes_accuracy(SynthMode::CrossmodalAnd, true) - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(text_only_bayes_accuracy(SynthMode::UnimodalText, true), 1.0);
        assert_eq!(image_only_bayes_accuracy(SynthMode::UnimodalText, true), 0.5);
        assert_eq!(image_only_bayes_accuracy(SynthMode::UnimodalImage, true), 1.0);
    }

    #[test]
    fn rebalanced_and_is_half_positive() {
        let w = cell_weights(SynthMode::CrossmodalAnd, true);
        assert!((w[1][1] - 0.5).abs() < 1e-15);
        let total: f64 = w.iter().flatten().sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_specs_rejected() {
        let ok = SynthSpec::default();
        ok.validate().unwrap();
        for bad in [
            SynthSpec { label_noise: 0.5, ..ok.clone() },
            SynthSpec { multimodal_fraction: 0.0, ..ok.clone() },
            SynthSpec { n_test: 3, ..ok.clone() },
            SynthSpec { image_side: 3, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn mode_names_round_trip() {
        for m in SynthMode::ALL {
            assert_eq!(m.as_str().parse::<SynthMode>().unwrap(), m);
        }
    }
}
