use std::fmt;

use super::record::TweetRecord;
use crate::encoders::preprocess_tweet_text;
use crate::error::{Error, Result};

pub const DEFAULT_TEXT_PROBABILITY_THRESHOLD: f64 = 0.3;

/// Corpus gathering rules.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterRuleSet {
    pub min_word_count: usize,
    /// Lowercase terms; a term of several words matches a contiguous token run.
    pub banned_terms: Vec<String>,
    /// Hate-term triggers used for keyword statistics.
    pub keyword_list: Vec<String>,
    pub text_probability_threshold: f64,
}

impl Default for FilterRuleSet {
    fn default() -> Self {
        Self {
            min_word_count: 3,
            banned_terms: Vec::new(),
            keyword_list: Vec::new(),
            text_probability_threshold: DEFAULT_TEXT_PROBABILITY_THRESHOLD,
        }
    }
}

impl FilterRuleSet {
    pub fn validate(&self) -> Result<()> {
        if self.min_word_count < 1 {
            return Err(Error::Config("min_word_count must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.text_probability_threshold) {
            return Err(Error::Config(format!(
                "text probability threshold {} outside [0, 1]",
                self.text_probability_threshold
            )));
        }
        Ok(())
    }

    /// Reads a term list: one term per line, `#` comments and blank lines ignored.
    pub fn parse_term_list(text: &str) -> Vec<String> {
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiscardReason {
    Retweet,
    TooShort,
    BannedTerm,
    NoImage,
}

impl DiscardReason {
    /// Evaluation order; the first triggered rule names the discard.
    pub const ORDER: [DiscardReason; 4] = [
        DiscardReason::Retweet,
        DiscardReason::TooShort,
        DiscardReason::BannedTerm,
        DiscardReason::NoImage,
    ];

    pub fn code(self) -> &'static str {
        match self {
            DiscardReason::Retweet => "retweet",
            DiscardReason::TooShort => "too_short",
            DiscardReason::BannedTerm => "banned_term",
            DiscardReason::NoImage => "no_image",
        }
    }

    /// Whether this rule alone rejects `record`.
    pub fn triggers(self, record: &TweetRecord, rules: &FilterRuleSet) -> bool {
        match self {
            DiscardReason::Retweet => record.is_retweet,
            DiscardReason::TooShort => {
                record.tweet_text.split_whitespace().count() < rules.min_word_count
            }
            DiscardReason::BannedTerm => contains_any_term(&record.tweet_text, &rules.banned_terms),
            DiscardReason::NoImage => record.image_ref.as_deref().is_none_or(str::is_empty),
        }
    }
}

impl fmt::Display for DiscardReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterDecision {
    Keep,
    Discard(DiscardReason),
}

impl FilterDecision {
    pub fn code(self) -> &'static str {
        match self {
            FilterDecision::Keep => "keep",
            FilterDecision::Discard(r) => r.code(),
        }
    }
}

pub fn filter_tweet(record: &TweetRecord, rules: &FilterRuleSet) -> FilterDecision {
    DiscardReason::ORDER
        .into_iter()
        .find(|r| r.triggers(record, rules))
        .map_or(FilterDecision::Keep, FilterDecision::Discard)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateDecision {
    Keep,
    Discard,
    /// No text probability available; the record was not gated.
    Ungated,
}

impl GateDecision {
    pub fn code(self) -> &'static str {
        match self {
            GateDecision::Keep => "keep",
            GateDecision::Discard => "discard",
            GateDecision::Ungated => "ungated",
        }
    }
}

/// Drops images whose aggregate text probability exceeds `threshold`.
pub fn gate_image_by_text_probability(record: &TweetRecord, threshold: f64) -> GateDecision {
    match record.image_text_probability {
        None => GateDecision::Ungated,
        Some(p) if p > threshold => GateDecision::Discard,
        Some(_) => GateDecision::Keep,
    }
}

/// Case-insensitive whole-token match of any term (single or multi-word)
/// against the preprocessed text.
pub fn contains_any_term(text: &str, terms: &[String]) -> bool {
    if terms.is_empty() {
        return false;
    }
    let tokens = preprocess_tweet_text(text);
    terms.iter().any(|term| {
        let needle: Vec<String> = term.split_whitespace().map(str::to_lowercase).collect();
        !needle.is_empty() && tokens.windows(needle.len()).any(|w| w == needle.as_slice())
    })
}
