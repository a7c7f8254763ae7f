use serde::{Deserialize, Serialize};

use super::record::{Category, Label, TweetRecord, WorkerAnnotation};
use crate::error::Error;

/// Annotations faster than this are treated as unreliable.
pub const DEFAULT_MIN_DURATION_SECONDS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Result of majority voting over the retained annotations of one tweet.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregation {
    pub label: Label,
    pub category: Category,
    pub retained: usize,
    /// Votes per category, indexed by [`Category::index`].
    pub votes: [usize; 6],
    /// Hate and not-hate votes were equal; resolved to not-hate.
    pub binary_tie: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AggregateError {
    NoAnnotations,
    /// Every annotation was faster than the minimum duration.
    Unlabelable { rejected: usize },
}

impl std::fmt::Display for AggregateError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AggregateError::NoAnnotations => f.write_str("no annotations"),
            AggregateError::Unlabelable { rejected } => {
                write!(f, "unlabelable: all {rejected} annotations were fast hits")
            }
        }
    }
}

/// Drops fast hits, takes the binary majority (ties go to not-hate) and, for
/// hate, the plurality hate category with ties broken by [`Category::HATE`] order.
pub fn aggregate_annotations(
    annotations: &[WorkerAnnotation],
    min_duration: f64,
) -> std::result::Result<Aggregation, AggregateError> {
    if annotations.is_empty() {
        return Err(AggregateError::NoAnnotations);
    }
    let mut votes = [0usize; 6];
    for a in annotations.iter().filter(|a| a.duration_seconds >= min_duration) {
        votes[a.category.index()] += 1;
    }
    let retained: usize = votes.iter().sum();
    if retained == 0 {
        return Err(AggregateError::Unlabelable {
            rejected: annotations.len(),
        });
    }
    let not_hate = votes[Category::NotHate.index()];
    let hate = retained - not_hate;
    let label = if hate > not_hate {
        Label::Hate
    } else {
        Label::NotHate
    };
    let category = match label {
        Label::NotHate => Category::NotHate,
        // max_by_key keeps the last maximum, so scan in reverse tie-break order
        Label::Hate => Category::HATE
            .into_iter()
            .rev()
            .max_by_key(|c| votes[c.index()])
            .expect("five hate categories"),
    };
    Ok(Aggregation {
        label,
        category,
        retained,
        votes,
        binary_tie: hate == not_hate,
    })
}

/// An aggregated, binary-labeled tweet.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub id: String,
    pub tweet_text: String,
    pub label: Label,
    pub category: Category,
    pub votes: [usize; 6],
    pub binary_tie: bool,
    pub split: Option<Split>,
}

impl LabeledExample {
    pub fn from_record(record: &TweetRecord, min_duration: f64) -> std::result::Result<Self, AggregateError> {
        let agg = aggregate_annotations(&record.annotations, min_duration)?;
        Ok(Self {
            id: record.id.clone(),
            tweet_text: record.tweet_text.clone(),
            label: agg.label,
            category: agg.category,
            votes: agg.votes,
            binary_tie: agg.binary_tie,
            split: None,
        })
    }

    pub fn retained_votes(&self) -> usize {
        self.votes.iter().sum()
    }
}

pub(crate) fn not_enough(split: &str, class: Label, required: usize, available: usize) -> Error {
    Error::Data(format!(
        "{split}: need {required} {class} examples, only {available} available"
    ))
}
