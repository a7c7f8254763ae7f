use std::collections::HashSet;
use std::io::Write;

use super::annotate::LabeledExample;
use super::record::{Category, Label};
use crate::encoders::preprocess_tweet_text;
use crate::error::Result;

/// Hate/not-hate counts among tweets containing a keyword.
#[derive(Debug, Clone, PartialEq)]
pub struct KeywordRate {
    pub keyword: String,
    pub hate_count: usize,
    pub not_hate_count: usize,
    /// `None` when the keyword never occurs.
    pub fraction: Option<f64>,
}

impl KeywordRate {
    pub fn total(&self) -> usize {
        self.hate_count + self.not_hate_count
    }
}

/// Per-keyword hate rates, most frequent keyword first (ties by keyword).
///
/// Matching is whole-token and case-insensitive on the preprocessed tweet
/// text; a tweet counts once per keyword however often it repeats it.
pub fn keyword_hate_rates(examples: &[LabeledExample], keywords: &[String]) -> Vec<KeywordRate> {
    let token_sets: Vec<HashSet<String>> = examples
        .iter()
        .map(|e| preprocess_tweet_text(&e.tweet_text).into_iter().collect())
        .collect();
    let mut rates: Vec<KeywordRate> = keywords
        .iter()
        .map(|k| {
            let k = k.to_lowercase();
            let (mut hate, mut not_hate) = (0, 0);
            for (e, tokens) in examples.iter().zip(&token_sets) {
                if tokens.contains(&k) {
                    match e.label {
                        Label::Hate => hate += 1,
                        Label::NotHate => not_hate += 1,
                    }
                }
            }
            let total = hate + not_hate;
            KeywordRate {
                keyword: k,
                hate_count: hate,
                not_hate_count: not_hate,
                fraction: (total > 0).then(|| hate as f64 / total as f64),
            }
        })
        .collect();
    rates.sort_by(|a, b| b.total().cmp(&a.total()).then_with(|| a.keyword.cmp(&b.keyword)));
    rates
}

/// CSV with header `keyword,hate_count,nothate_count,fraction`; undefined
/// fractions are written as `null`.
pub fn write_keyword_csv<W: Write>(out: W, rates: &[KeywordRate]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| crate::Error::Data(format!("csv: {e}"));
    w.write_record(["keyword", "hate_count", "nothate_count", "fraction"])
        .map_err(io)?;
    for r in rates {
        let fraction = r.fraction.map_or_else(|| "null".to_string(), |f| format!("{f:.6}"));
        w.write_record([
            r.keyword.clone(),
            r.hate_count.to_string(),
            r.not_hate_count.to_string(),
            fraction,
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| crate::Error::Data(format!("csv: {e}")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionRow {
    pub class: String,
    pub count: usize,
    pub percent: f64,
}

/// Share of each category among all category votes given, followed by the
/// binary hate/not-hate shares.
///
/// `binary` may be supplied separately because published sub-category counts
/// need not add up to the binary hate total.
pub fn class_distribution(
    categories: &[(Category, usize)],
    binary: Option<(usize, usize)>,
) -> Vec<DistributionRow> {
    let total: usize = categories.iter().map(|(_, n)| n).sum();
    let pct = |n: usize, of: usize| if of == 0 { 0.0 } else { 100.0 * n as f64 / of as f64 };
    let mut rows: Vec<DistributionRow> = categories
        .iter()
        .map(|&(c, n)| DistributionRow {
            class: c.as_str().to_string(),
            count: n,
            percent: pct(n, total),
        })
        .collect();
    let (not_hate, hate) = binary.unwrap_or_else(|| {
        let not_hate = categories
            .iter()
            .filter(|(c, _)| !c.is_hate())
            .map(|(_, n)| n)
            .sum();
        (not_hate, total - not_hate)
    });
    for (name, n) in [("not_hate", not_hate), ("hate", hate)] {
        rows.push(DistributionRow {
            class: name.to_string(),
            count: n,
            percent: pct(n, not_hate + hate),
        });
    }
    rows
}

/// Category counts over aggregated examples, in [`Category::ALL`] order.
pub fn category_counts(examples: &[LabeledExample]) -> Vec<(Category, usize)> {
    Category::ALL
        .into_iter()
        .map(|c| (c, examples.iter().filter(|e| e.category == c).count()))
        .collect()
}

/// CSV with header `class,count,percent`.
pub fn write_distribution_csv<W: Write>(out: W, rows: &[DistributionRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| crate::Error::Data(format!("csv: {e}"));
    w.write_record(["class", "count", "percent"]).map_err(io)?;
    for r in rows {
        w.write_record([r.class.clone(), r.count.to_string(), format!("{:.2}", r.percent)])
            .map_err(io)?;
    }
    w.flush()
        .map_err(|e| crate::Error::Data(format!("csv: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(text: &str, label: Label) -> LabeledExample {
        LabeledExample {
            id: text.into(),
            tweet_text: text.into(),
            label,
            category: if label.is_hate() { Category::Racist } else { Category::NotHate },
            votes: [0; 6],
            binary_tie: false,
            split: None,
        }
    }

    #[test]
    fn absent_keyword_has_no_fraction() {
        let rates = keyword_hate_rates(&[ex("hello there", Label::Hate)], &["termz".into()]);
        assert_eq!(rates[0].total(), 0);
        assert_eq!(rates[0].fraction, None);
    }

    #[test]
    fn even_split_is_half() {
        let data = vec![
            ex("termX one", Label::Hate),
            ex("two TERMX", Label::Hate),
            ex("#termx three", Label::NotHate),
            ex("termx four", Label::NotHate),
        ];
        let rates = keyword_hate_rates(&data, &["termx".into()]);
        assert_eq!(rates[0].fraction, Some(0.5));
    }

    #[test]
    fn sorted_by_frequency() {
        let data = vec![ex("a b", Label::Hate), ex("b c", Label::NotHate)];
        let rates = keyword_hate_rates(&data, &["a".into(), "c".into(), "b".into()]);
        let order: Vec<_> = rates.iter().map(|r| r.keyword.as_str()).collect();
        assert_eq!(order, ["b", "a", "c"]);
    }

    #[test]
    fn keyword_csv_writes_null() {
        let mut buf = Vec::new();
        write_keyword_csv(
            &mut buf,
            &[KeywordRate { keyword: "k".into(), hate_count: 0, not_hate_count: 0, fraction: None }],
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "keyword,hate_count,nothate_count,fraction\nk,0,0,null\n");
    }
}
