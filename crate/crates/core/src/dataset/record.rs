use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Annotation categories offered to workers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    NotHate,
    Racist,
    Sexist,
    Homophobic,
    ReligionAttack,
    OtherHate,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::NotHate,
        Category::Racist,
        Category::Sexist,
        Category::Homophobic,
        Category::ReligionAttack,
        Category::OtherHate,
    ];

    /// Hate categories in tie-break order.
    pub const HATE: [Category; 5] = [
        Category::Racist,
        Category::Sexist,
        Category::Homophobic,
        Category::ReligionAttack,
        Category::OtherHate,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_hate(self) -> bool {
        self != Category::NotHate
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::NotHate => "NotHate",
            Category::Racist => "Racist",
            Category::Sexist => "Sexist",
            Category::Homophobic => "Homophobic",
            Category::ReligionAttack => "ReligionAttack",
            Category::OtherHate => "OtherHate",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Data(format!("unknown category `{s}`")))
    }
}

/// Binary target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    NotHate,
    Hate,
}

impl Label {
    /// Class index used by the classifiers: not-hate 0, hate 1.
    pub fn class(self) -> usize {
        match self {
            Label::NotHate => 0,
            Label::Hate => 1,
        }
    }

    pub fn from_class(class: usize) -> Self {
        if class == 1 {
            Label::Hate
        } else {
            Label::NotHate
        }
    }

    pub fn is_hate(self) -> bool {
        self == Label::Hate
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::NotHate => "not_hate",
            Label::Hate => "hate",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerAnnotation {
    pub worker_id: String,
    pub category: Category,
    pub duration_seconds: f64,
}

/// One raw multimodal publication as ingested from a corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub tweet_text: String,
    #[serde(default)]
    pub is_retweet: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
    #[serde(default)]
    pub image_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_text_probability: Option<f64>,
    #[serde(default)]
    pub annotations: Vec<WorkerAnnotation>,
}

impl TweetRecord {
    fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if let Some(p) = self.image_text_probability {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("image_text_probability {p} outside [0, 1]"));
            }
        }
        if let Some(a) = self
            .annotations
            .iter()
            .find(|a| !a.duration_seconds.is_finite() || a.duration_seconds < 0.0)
        {
            return Err(format!(
                "annotation by `{}` has invalid duration {}",
                a.worker_id, a.duration_seconds
            ));
        }
        Ok(())
    }
}

/// A line that could not be turned into a record.
#[derive(Debug, Clone, PartialEq)]
pub struct LineDiagnostic {
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImportReport {
    pub records: Vec<TweetRecord>,
    pub diagnostics: Vec<LineDiagnostic>,
}

/// Source of tweet records in some external layout.
pub trait RecordSource {
    fn read_records(&self, path: &Path) -> Result<ImportReport>;
}

/// The native layout: one JSON object per line with the [`TweetRecord`] fields.
#[derive(Debug, Clone, Copy, Default)]
pub struct JsonLines;

impl RecordSource for JsonLines {
    fn read_records(&self, path: &Path) -> Result<ImportReport> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        parse_lines(BufReader::new(file)).map_err(|e| Error::io(path, e))
    }
}

/// Reads a line-delimited corpus. Malformed lines and duplicate ids are
/// reported per line; well-formed records are kept.
pub fn import_corpus(path: &Path) -> Result<ImportReport> {
    JsonLines.read_records(path)
}

pub fn parse_lines<R: BufRead>(reader: R) -> std::io::Result<ImportReport> {
    let mut report = ImportReport::default();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<TweetRecord>(&line)
            .map_err(|e| e.to_string())
            .and_then(|r| r.validate().map(|_| r));
        match parsed {
            Ok(r) if !seen.insert(r.id.clone()) => report.diagnostics.push(LineDiagnostic {
                line: i + 1,
                message: format!("duplicate id `{}`", r.id),
            }),
            Ok(r) => report.records.push(r),
            Err(message) => report.diagnostics.push(LineDiagnostic {
                line: i + 1,
                message,
            }),
        }
    }
    Ok(report)
}

pub fn export_corpus(path: &Path, records: &[TweetRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("records serialize");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const VALID: &str = r#"{"id":"a","tweet_text":"one two three","is_retweet":false,"image_ref":"a.png","image_text":"","annotations":[{"worker_id":"w1","category":"Racist","duration_seconds":4.5}]}"#;

    #[test]
    fn empty_input_gives_nothing() {
        let r = parse_lines("".as_bytes()).unwrap();
        assert!(r.records.is_empty() && r.diagnostics.is_empty());
    }

    #[test]
    fn truncated_line_is_reported_with_its_number() {
        let text = format!(
            "{}\n{}\n{}\n{}\n",
            VALID,
            VALID.replace("\"a\"", "\"b\""),
            VALID.replace("\"a\"", "\"c\""),
            &VALID[..40]
        );
        let r = parse_lines(text.as_bytes()).unwrap();
        assert_eq!(r.records.len(), 3);
        assert_eq!(r.diagnostics.len(), 1);
        assert_eq!(r.diagnostics[0].line, 4);
    }

    #[test]
    fn out_of_range_probability_is_rejected() {
        let line = VALID.replace("\"image_text\":\"\"", "\"image_text\":\"\",\"image_text_probability\":1.5");
        let r = parse_lines(line.as_bytes()).unwrap();
        assert!(r.records.is_empty());
        assert!(r.diagnostics[0].message.contains("probability"));
    }

    #[test]
    fn duplicate_ids_are_reported() {
        let text = format!("{VALID}\n{VALID}\n");
        let r = parse_lines(text.as_bytes()).unwrap();
        assert_eq!(r.records.len(), 1);
        assert_eq!(r.diagnostics[0].line, 2);
    }

    #[test]
    fn unknown_category_is_a_diagnostic() {
        let line = VALID.replace("Racist", "Rude");
        let r = parse_lines(line.as_bytes()).unwrap();
        assert_eq!(r.diagnostics.len(), 1);
    }
}
