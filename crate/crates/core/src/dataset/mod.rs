//! Corpus construction: ingestion, gathering filters, the text-in-image gate,
//! annotation aggregation, balanced splits and keyword statistics.

mod annotate;
mod filter;
mod record;
mod splits;
mod stats;

pub use annotate::{
    aggregate_annotations, AggregateError, Aggregation, LabeledExample, Split,
    DEFAULT_MIN_DURATION_SECONDS,
};
pub use filter::{
    contains_any_term, filter_tweet, gate_image_by_text_probability, DiscardReason,
    FilterDecision, FilterRuleSet, GateDecision, DEFAULT_TEXT_PROBABILITY_THRESHOLD,
};
pub use record::{
    export_corpus, import_corpus, parse_lines, Category, ImportReport, JsonLines, Label,
    LineDiagnostic, RecordSource, TweetRecord, WorkerAnnotation,
};
pub use splits::{build_splits, split_counts, SplitCounts};
pub use stats::{
    category_counts, class_distribution, keyword_hate_rates, write_distribution_csv,
    write_keyword_csv, DistributionRow, KeywordRate,
};
