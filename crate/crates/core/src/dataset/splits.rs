use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::annotate::{not_enough, LabeledExample, Split};
use super::record::Label;
use crate::error::{Error, Result};

/// Per-split class counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SplitCounts {
    pub hate: usize,
    pub not_hate: usize,
}

impl SplitCounts {
    pub fn total(self) -> usize {
        self.hate + self.not_hate
    }
}

/// Assigns every example to train, val or test.
///
/// Val and test are exactly half hate; members are drawn without replacement
/// from a seeded shuffle of each class (in input order). Everything left over
/// goes to train.
pub fn build_splits(
    examples: &mut [LabeledExample],
    val_size: usize,
    test_size: usize,
    seed: u64,
) -> Result<()> {
    for (name, size) in [("val", val_size), ("test", test_size)] {
        if size % 2 != 0 {
            return Err(Error::Config(format!(
                "{name} size {size} must be even to be balanced"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_class = (val_size + test_size) / 2;
    let mut by_class = Vec::new();
    for class in [Label::Hate, Label::NotHate] {
        let mut idx: Vec<usize> = examples
            .iter()
            .enumerate()
            .filter(|(_, e)| e.label == class)
            .map(|(i, _)| i)
            .collect();
        if idx.len() < per_class {
            return Err(not_enough("val+test", class, per_class, idx.len()));
        }
        idx.shuffle(&mut rng);
        by_class.push(idx);
    }
    for e in examples.iter_mut() {
        e.split = Some(Split::Train);
    }
    for idx in &by_class {
        for &i in &idx[..val_size / 2] {
            examples[i].split = Some(Split::Val);
        }
        for &i in &idx[val_size / 2..per_class] {
            examples[i].split = Some(Split::Test);
        }
    }
    Ok(())
}

pub fn split_counts(examples: &[LabeledExample], split: Split) -> SplitCounts {
    let mut c = SplitCounts::default();
    for e in examples.iter().filter(|e| e.split == Some(split)) {
        match e.label {
            Label::Hate => c.hate += 1,
            Label::NotHate => c.not_hate += 1,
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::record::Category;

    fn examples(hate: usize, not_hate: usize) -> Vec<LabeledExample> {
        (0..hate + not_hate)
            .map(|i| LabeledExample {
                id: format!("e{i}"),
                tweet_text: String::new(),
                label: if i < hate { Label::Hate } else { Label::NotHate },
                category: if i < hate { Category::Racist } else { Category::NotHate },
                votes: [0; 6],
                binary_tie: false,
                split: None,
            })
            .collect()
    }

    #[test]
    fn balanced_val_and_test() {
        let mut ex = examples(100, 100);
        build_splits(&mut ex, 20, 40, 7).unwrap();
        assert_eq!(split_counts(&ex, Split::Val), SplitCounts { hate: 10, not_hate: 10 });
        assert_eq!(split_counts(&ex, Split::Test), SplitCounts { hate: 20, not_hate: 20 });
        assert_eq!(split_counts(&ex, Split::Train).total(), 140);
    }

    #[test]
    fn same_seed_same_assignment() {
        let mut a = examples(60, 90);
        let mut b = examples(60, 90);
        build_splits(&mut a, 10, 20, 42).unwrap();
        build_splits(&mut b, 10, 20, 42).unwrap();
        assert_eq!(a, b);
        let mut c = examples(60, 90);
        build_splits(&mut c, 10, 20, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn insufficient_class_reports_counts() {
        let mut ex = examples(5, 100);
        let err = build_splits(&mut ex, 10, 10, 0).unwrap_err().to_string();
        assert!(err.contains("10") && err.contains('5'), "{err}");
    }

    #[test]
    fn paper_scale_accepted() {
        let mut ex = examples(36_978, 112_845);
        build_splits(&mut ex, 5_000, 10_000, 1).unwrap();
        assert_eq!(split_counts(&ex, Split::Test), SplitCounts { hate: 5_000, not_hate: 5_000 });
        assert_eq!(split_counts(&ex, Split::Train).total(), 149_823 - 15_000);
    }

    #[test]
    fn odd_sizes_rejected() {
        let mut ex = examples(10, 10);
        assert!(build_splits(&mut ex, 3, 4, 0).is_err());
    }
}
