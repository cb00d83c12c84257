//! Article ingestion, sentence splitting and token-budget truncation.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::{preprocess_text, ProtectionMap};

pub const DEFAULT_MAX_TOKENS: usize = 1024;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate article id {0:?}")]
    DuplicateId(String),
    #[error("line {line}: article id must be non-empty")]
    EmptyId { line: usize },
    #[error("article {id:?}: {message}")]
    InvalidArticle { id: String, message: String },
    #[error("token budget must be at least 1")]
    ZeroBudget,
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawArticle {
    pub id: String,
    pub text: String,
}

/// A sentence inside [`CleanArticle::text`]. Offsets are half-open and count
/// Unicode scalar values, not bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceSpan {
    pub index: usize,
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
}

impl SentenceSpan {
    pub fn token_count(&self, counter: &dyn TokenCounter) -> usize {
        counter.count(&self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanArticle {
    pub id: String,
    pub text: String,
    pub sentences: Vec<SentenceSpan>,
    pub protections: ProtectionMap,
    pub truncated: bool,
}

impl CleanArticle {
    pub fn from_raw(raw: &RawArticle) -> Self {
        let (text, protections) = preprocess_text(&raw.text);
        let sentences = split_sentences(&text);
        CleanArticle {
            id: raw.id.clone(),
            text,
            sentences,
            protections,
            truncated: false,
        }
    }

    pub fn sentence_count(&self) -> usize {
        self.sentences.len()
    }

    pub fn sentence_texts(&self) -> Vec<&str> {
        self.sentences.iter().map(|s| s.text.as_str()).collect()
    }
}

/// Reads a line-delimited article file. Blank lines are ignored.
pub fn load_corpus(path: &Path) -> Result<Vec<RawArticle>, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RawArticle = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if record.id.is_empty() {
            return Err(CorpusError::EmptyId { line: i + 1 });
        }
        if !seen.insert(record.id.clone()) {
            return Err(CorpusError::DuplicateId(record.id));
        }
        out.push(record);
    }
    Ok(out)
}

/// Splits preprocessed text at every literal period. Closing double quotes
/// directly after the period stay with the sentence. Trailing text without a
/// period becomes a final span so that no visible character is lost.
pub fn split_sentences(clean: &str) -> Vec<SentenceSpan> {
    let chars: Vec<char> = clean.chars().collect();
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    let mut i = 0;
    let push = |spans: &mut Vec<SentenceSpan>, s: usize, e: usize| {
        let index = spans.len();
        spans.push(SentenceSpan {
            index,
            char_start: s,
            char_end: e,
            text: chars[s..e].iter().collect(),
        });
    };
    while i < chars.len() {
        let c = chars[i];
        if start.is_none() {
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            start = Some(i);
        }
        if c == '.' {
            let mut end = i + 1;
            while end < chars.len() && chars[end] == '"' {
                end += 1;
            }
            push(&mut spans, start.take().unwrap(), end);
            i = end;
            continue;
        }
        i += 1;
    }
    if let Some(s) = start {
        let mut e = chars.len();
        while e > s && chars[e - 1].is_whitespace() {
            e -= 1;
        }
        push(&mut spans, s, e);
    }
    spans
}

/// Counts tokens in a piece of text for budget purposes.
pub trait TokenCounter: Send + Sync {
    fn id(&self) -> &str;
    fn count(&self, text: &str) -> usize;
}

/// A token is a maximal run of non-whitespace characters.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceCounter;

impl TokenCounter for WhitespaceCounter {
    fn id(&self) -> &str {
        "whitespace"
    }

    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenBudget {
    pub max_tokens: usize,
    pub tokenizer_id: String,
}

impl Default for TokenBudget {
    fn default() -> Self {
        TokenBudget {
            max_tokens: DEFAULT_MAX_TOKENS,
            tokenizer_id: WhitespaceCounter.id().to_owned(),
        }
    }
}

impl TokenBudget {
    pub fn new(max_tokens: usize) -> Result<Self, CorpusError> {
        if max_tokens == 0 {
            return Err(CorpusError::ZeroBudget);
        }
        Ok(TokenBudget {
            max_tokens,
            ..Default::default()
        })
    }
}

/// Raised when the first sentence alone is over budget; the sentence is kept
/// whole anyway.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OversizedSentence {
    pub article_id: String,
    pub tokens: usize,
    pub max_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Truncation {
    pub article: CleanArticle,
    pub warning: Option<OversizedSentence>,
}

pub fn truncate_to_budget(article: &CleanArticle, budget: &TokenBudget) -> Result<Truncation, CorpusError> {
    truncate_with(article, budget, &WhitespaceCounter)
}

/// Keeps the longest prefix of whole sentences that fits the budget. Text and
/// protections past the last kept sentence are dropped with it.
pub fn truncate_with(
    article: &CleanArticle,
    budget: &TokenBudget,
    counter: &dyn TokenCounter,
) -> Result<Truncation, CorpusError> {
    if budget.max_tokens == 0 {
        return Err(CorpusError::ZeroBudget);
    }
    let mut used = 0usize;
    let mut keep = 0usize;
    for s in &article.sentences {
        let n = s.token_count(counter);
        if used + n > budget.max_tokens {
            break;
        }
        used += n;
        keep += 1;
    }

    let mut warning = None;
    if keep == 0 && !article.sentences.is_empty() {
        keep = 1;
        warning = Some(OversizedSentence {
            article_id: article.id.clone(),
            tokens: article.sentences[0].token_count(counter),
            max_tokens: budget.max_tokens,
        });
    }
    if keep == article.sentences.len() && warning.is_none() {
        return Ok(Truncation {
            article: article.clone(),
            warning,
        });
    }

    let cut = article.sentences[keep - 1].char_end;
    let text: String = article.text.chars().take(cut).collect();
    let protections = ProtectionMap(article.protections.iter().filter(|p| p.offset < cut).cloned().collect());
    Ok(Truncation {
        article: CleanArticle {
            id: article.id.clone(),
            text,
            sentences: article.sentences[..keep].to_vec(),
            protections,
            truncated: true,
        },
        warning,
    })
}

// Wire format for the clean corpus.

#[derive(Debug, Serialize, Deserialize)]
struct SpanRecord {
    index: usize,
    start: usize,
    end: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct CleanRecord {
    id: String,
    text: String,
    spans: Vec<SpanRecord>,
    protections: ProtectionMap,
    truncated: bool,
}

impl CleanArticle {
    pub fn to_json_line(&self) -> String {
        let record = CleanRecord {
            id: self.id.clone(),
            text: self.text.clone(),
            spans: self
                .sentences
                .iter()
                .map(|s| SpanRecord {
                    index: s.index,
                    start: s.char_start,
                    end: s.char_end,
                })
                .collect(),
            protections: self.protections.clone(),
            truncated: self.truncated,
        };
        serde_json::to_string(&record).expect("clean record serializes")
    }

    fn from_record(r: CleanRecord) -> Result<Self, CorpusError> {
        let chars: Vec<char> = r.text.chars().collect();
        let invalid = |message: String| CorpusError::InvalidArticle {
            id: r.id.clone(),
            message,
        };
        let mut sentences = Vec::with_capacity(r.spans.len());
        let mut prev_end = 0;
        for (i, s) in r.spans.iter().enumerate() {
            if s.index != i || s.start >= s.end || s.end > chars.len() || s.start < prev_end {
                return Err(invalid(format!("span {i} is out of order or out of range")));
            }
            prev_end = s.end;
            sentences.push(SentenceSpan {
                index: i,
                char_start: s.start,
                char_end: s.end,
                text: chars[s.start..s.end].iter().collect(),
            });
        }
        Ok(CleanArticle {
            id: r.id,
            text: r.text,
            sentences,
            protections: r.protections,
            truncated: r.truncated,
        })
    }
}

pub fn write_clean_corpus(path: &Path, articles: &[CleanArticle]) -> Result<(), CorpusError> {
    let mut f = std::io::BufWriter::new(File::create(path).map_err(|e| CorpusError::io(path, e))?);
    for a in articles {
        writeln!(f, "{}", a.to_json_line()).map_err(|e| CorpusError::io(path, e))?;
    }
    f.flush().map_err(|e| CorpusError::io(path, e))
}

pub fn load_clean_corpus(path: &Path) -> Result<Vec<CleanArticle>, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CleanRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if record.id.is_empty() {
            return Err(CorpusError::EmptyId { line: i + 1 });
        }
        if !seen.insert(record.id.clone()) {
            return Err(CorpusError::DuplicateId(record.id));
        }
        out.push(CleanArticle::from_record(record)?);
    }
    Ok(out)
}
