//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use mfuse::dataset::{
    filter_tweet, gate_image_by_text_probability, import_corpus, AggregateError, FilterDecision,
    FilterRuleSet, GateDecision, LabeledExample, TweetRecord, DEFAULT_MIN_DURATION_SECONDS,
};
use mfuse::evaluation::ScoredExample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FIXTURE_SPLIT_SEED: u64 = 5;
pub const FIXTURE_VAL: usize = 8;
pub const FIXTURE_TEST: usize = 12;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/pipeline")
}

pub fn expected(name: &str) -> PathBuf {
    fixture_dir().join("expected").join(name)
}

pub fn fixture_records() -> Vec<TweetRecord> {
    let report = import_corpus(&fixture_dir().join("corpus.jsonl")).expect("fixture corpus");
    assert!(report.diagnostics.is_empty(), "{:?}", report.diagnostics);
    report.records
}

pub fn fixture_rules() -> FilterRuleSet {
    let read = |name: &str| fs::read_to_string(fixture_dir().join(name)).expect("term list");
    FilterRuleSet {
        banned_terms: FilterRuleSet::parse_term_list(&read("banned_terms.txt")),
        keyword_list: FilterRuleSet::parse_term_list(&read("keywords.txt")),
        ..FilterRuleSet::default()
    }
}

/// CSV rows without the header.
pub fn read_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    r.records()
        .map(|rec| rec.expect("csv row").iter().map(str::to_string).collect())
        .collect()
}

/// The fixture pushed through filter, gate and aggregation, one row per
/// record (`id, filter, gate, aggregation`), plus the labeled survivors.
pub struct FixtureReplay {
    pub decisions: Vec<Vec<String>>,
    pub examples: Vec<LabeledExample>,
}

pub fn replay_fixture() -> FixtureReplay {
    let rules = fixture_rules();
    let mut decisions = Vec::new();
    let mut examples = Vec::new();
    for r in fixture_records() {
        let filter = filter_tweet(&r, &rules);
        let mut row = vec![r.id.clone(), filter.code().to_string(), String::new(), String::new()];
        if filter == FilterDecision::Keep {
            let gate = gate_image_by_text_probability(&r, rules.text_probability_threshold);
            row[2] = gate.code().to_string();
            if gate != GateDecision::Discard {
                row[3] = match LabeledExample::from_record(&r, DEFAULT_MIN_DURATION_SECONDS) {
                    Ok(e) => {
                        let code = if e.binary_tie { format!("{}_tie", e.label) } else { e.label.to_string() };
                        examples.push(e);
                        code
                    }
                    Err(AggregateError::NoAnnotations) => "no_annotations".into(),
                    Err(AggregateError::Unlabelable { .. }) => "unlabelable".into(),
                };
            }
        }
        decisions.push(row);
    }
    FixtureReplay { decisions, examples }
}

pub fn label_rows(examples: &[LabeledExample]) -> Vec<Vec<String>> {
    examples
        .iter()
        .map(|e| {
            vec![
                e.id.clone(),
                e.label.to_string(),
                e.category.as_str().to_string(),
                e.retained_votes().to_string(),
                e.binary_tie.to_string(),
            ]
        })
        .collect()
}

/// Random scored instance of size `2..=100` with both classes present and
/// frequent ties.
pub fn random_instance(seed: u64) -> Vec<ScoredExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=100);
    let levels = [2, 5, 20, 0][rng.random_range(0..4)];
    let mut out: Vec<ScoredExample> = (0..n)
        .map(|i| {
            let score = if levels == 0 {
                rng.random::<f64>()
            } else {
                rng.random_range(0..levels) as f64 / levels as f64
            };
            ScoredExample::new(format!("e{i}"), score, rng.random_bool(0.5))
        })
        .collect();
    out[0].label = true;
    out[1].label = false;
    out
}

/// Positive-negative pairs ranked correctly, ties counting one half.
pub fn oracle_auc(s: &[ScoredExample]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for p in s.iter().filter(|e| e.label) {
        for q in s.iter().filter(|e| !e.label) {
            pairs += 1.0;
            if p.score > q.score {
                wins += 1.0;
            } else if p.score == q.score {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// F1 of the hate class predicting `score >= threshold`, from precision and recall.
pub fn oracle_f1(s: &[ScoredExample], threshold: f64) -> f64 {
    let predicted: Vec<&ScoredExample> = s.iter().filter(|e| e.score >= threshold).collect();
    let tp = predicted.iter().filter(|e| e.label).count() as f64;
    let positives = s.iter().filter(|e| e.label).count() as f64;
    if tp == 0.0 {
        return 0.0;
    }
    let precision = tp / predicted.len() as f64;
    let recall = tp / positives;
    2.0 * precision * recall / (precision + recall)
}

/// Best F1 over every observed score used as a threshold.
pub fn oracle_max_f1(s: &[ScoredExample]) -> f64 {
    s.iter().map(|e| oracle_f1(s, e.score)).fold(0.0, f64::max)
}

/// Mean of the two per-class recalls, in percent.
pub fn oracle_balanced_accuracy(s: &[ScoredExample], threshold: f64) -> f64 {
    let recall = |class: bool| {
        let members: Vec<&ScoredExample> = s.iter().filter(|e| e.label == class).collect();
        let right = members.iter().filter(|e| (e.score >= threshold) == class).count();
        right as f64 / members.len() as f64
    };
    100.0 * (recall(true) + recall(false)) / 2.0
}
