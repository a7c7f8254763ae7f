use std::collections::HashMap;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const USER: &str = "<user>";
pub const HASHTAG: &str = "<hashtag>";
pub const NUMBER: &str = "<number>";
pub const URL: &str = "<url>";

/// Special tokens, at indices 0..6 of every vocabulary.
pub const SPECIAL_TOKENS: [&str; 6] = [PAD, UNK, USER, HASHTAG, NUMBER, URL];

static URL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?i)(https?://|www\.)\S+$").expect("valid regex"));
static NUMBER_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[+-]?\d+([.,:]\d+)*%?$").expect("valid regex"));
static HASHTAG_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^#(\w+)").expect("valid regex"));

/// Tokenizes a tweet on whitespace.
///
/// URLs become `<url>`, `@mentions` become `<user>`, `#tag` becomes
/// `<hashtag>` followed by the normalized tag body, numbers become
/// `<number>`. Remaining tokens are lowercased, stripped of surrounding
/// punctuation and classified again, so the output is a fixed point.
pub fn preprocess_tweet_text(raw: &str) -> Vec<String> {
    let mut out = Vec::new();
    for token in raw.split_whitespace() {
        push_token(token, &mut out);
    }
    out
}

fn push_token(token: &str, out: &mut Vec<String>) {
    let lower = token.to_lowercase();
    if SPECIAL_TOKENS.contains(&lower.as_str()) {
        out.push(lower);
    } else if URL_RE.is_match(token) {
        out.push(URL.to_string());
    } else if token.len() > 1 && token.starts_with('@') {
        out.push(USER.to_string());
    } else if let Some(cap) = HASHTAG_RE.captures(&lower) {
        out.push(HASHTAG.to_string());
        push_token(&cap[1], out);
    } else if NUMBER_RE.is_match(token) {
        out.push(NUMBER.to_string());
    } else {
        let word = lower.trim_matches(|c: char| !c.is_alphanumeric());
        if word == lower {
            if !word.is_empty() {
                out.push(lower);
            }
        } else {
            push_token(word, out);
        }
    }
}

/// Token ↔ index map with dense indices and the special tokens first.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        let mut v = Self {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for t in SPECIAL_TOKENS {
            v.add(t);
        }
        v
    }

    /// Builds from token streams, keeping tokens seen at least `min_count`
    /// times, in order of first appearance.
    pub fn build<'a, I>(streams: I, min_count: usize) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        let mut order = Vec::new();
        for stream in streams {
            for t in stream {
                let c = counts.entry(t.as_str()).or_insert(0);
                if *c == 0 {
                    order.push(t.as_str());
                }
                *c += 1;
            }
        }
        let mut v = Self::new();
        for t in order {
            if counts[t] >= min_count {
                v.add(t);
            }
        }
        v
    }

    pub fn add(&mut self, token: &str) -> usize {
        if let Some(&i) = self.index.get(token) {
            return i;
        }
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), self.tokens.len() - 1);
        self.tokens.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn unk(&self) -> usize {
        1
    }

    /// Maps tokens to indices; unknown tokens map to `<unk>`.
    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens
            .iter()
            .map(|t| self.get(t).unwrap_or(self.unk()))
            .collect()
    }

    /// One token per line; the line number is the index.
    pub fn to_file_string(&self) -> String {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s
    }

    pub fn from_file_str(text: &str) -> Result<Self> {
        let tokens: Vec<String> = text.lines().map(str::to_string).collect();
        if tokens.len() < SPECIAL_TOKENS.len()
            || tokens[..SPECIAL_TOKENS.len()] != SPECIAL_TOKENS.map(String::from)
        {
            return Err(Error::Data(format!(
                "vocabulary must start with the special tokens {SPECIAL_TOKENS:?}"
            )));
        }
        let mut v = Self::new();
        for (i, t) in tokens.iter().enumerate().skip(SPECIAL_TOKENS.len()) {
            if t.is_empty() || v.index.contains_key(t) {
                return Err(Error::Data(format!(
                    "vocabulary line {}: empty or duplicate token",
                    i + 1
                )));
            }
            v.add(t);
        }
        Ok(v)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_file_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_file_str(&text)
    }
}

/// Parses the plain-text embedding interchange format: `token v1 .. vd` per line.
pub fn parse_embeddings(text: &str) -> Result<HashMap<String, Vec<f64>>> {
    let mut out = HashMap::new();
    let mut dim = None;
    for (i, line) in text.lines().enumerate() {
        let mut fields = line.split_ascii_whitespace();
        let Some(token) = fields.next() else {
            continue;
        };
        let values: Vec<f64> = fields
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Data(format!("embedding line {}: bad value `{v}`", i + 1)))
            })
            .collect::<Result<_>>()?;
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::Data(format!(
                    "embedding line {}: {} values, expected {d}",
                    i + 1,
                    values.len()
                )))
            }
            _ => {}
        }
        out.insert(token.to_string(), values);
    }
    Ok(out)
}

/// Copies imported vectors into rows of an embedding table `[vocab, dim]`.
/// Returns how many vocabulary tokens were found.
pub fn apply_embeddings(
    table: &mut Tensor,
    vocab: &Vocabulary,
    imported: &HashMap<String, Vec<f64>>,
) -> Result<usize> {
    let dim = table.shape()[1];
    let mut hits = 0;
    for (i, token) in vocab.tokens.iter().enumerate() {
        if let Some(v) = imported.get(token) {
            if v.len() != dim {
                return Err(Error::Data(format!(
                    "embedding for `{token}` has {} values, table expects {dim}",
                    v.len()
                )));
            }
            table.data_mut()[i * dim..(i + 1) * dim].copy_from_slice(v);
            hits += 1;
        }
    }
    Ok(hits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn mentions_and_hashtags() {
        assert_eq!(
            preprocess_tweet_text("@john you rock #cool"),
            toks(&["<user>", "you", "rock", "<hashtag>", "cool"])
        );
    }

    #[test]
    fn output_is_a_fixed_point() {
        for raw in ["#_", "#123", "(www.x.org)", "\"@bob\"", "#Cool!", "<URL>,"] {
            let once = preprocess_tweet_text(raw);
            assert_eq!(preprocess_tweet_text(&once.join(" ")), once, "{raw}");
        }
        assert_eq!(preprocess_tweet_text("#_"), toks(&["<hashtag>"]));
        assert_eq!(preprocess_tweet_text("#123"), toks(&["<hashtag>", "<number>"]));
        assert_eq!(preprocess_tweet_text("(www.x.org)"), toks(&["<url>"]));
    }

    #[test]
    fn empty_text() {
        assert!(preprocess_tweet_text("").is_empty());
    }

    #[test]
    fn urls_and_alphanumerics() {
        assert_eq!(
            preprocess_tweet_text("Visit http://x.co 2day"),
            toks(&["visit", "<url>", "2day"])
        );
        assert_eq!(
            preprocess_tweet_text("Got 42 likes, 3.5 stars! www.site.org"),
            toks(&["got", "<number>", "likes", "<number>", "stars", "<url>"])
        );
    }

    #[test]
    fn vocabulary_file_round_trip() {
        let v = Vocabulary::build([toks(&["a", "b", "a"]).as_slice()], 1);
        assert_eq!(v.len(), 8);
        assert_eq!(v.get(PAD), Some(0));
        let back = Vocabulary::from_file_str(&v.to_file_string()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.encode(&toks(&["b", "zzz"])), vec![7, 1]);
    }

    #[test]
    fn vocabulary_file_needs_specials() {
        assert!(Vocabulary::from_file_str("a\nb\n").is_err());
    }

    #[test]
    fn embedding_import() {
        let v = Vocabulary::build([toks(&["cat", "dog"]).as_slice()], 1);
        let imported = parse_embeddings("cat 1 2 3\nfish 0 0 0\n").unwrap();
        let mut table = Tensor::zeros(&[v.len(), 3]);
        assert_eq!(apply_embeddings(&mut table, &v, &imported).unwrap(), 1);
        let row = v.get("cat").unwrap();
        assert_eq!(&table.data()[row * 3..row * 3 + 3], &[1.0, 2.0, 3.0]);
        assert!(parse_embeddings("a 1 2\nb 1\n").is_err());
    }
}
