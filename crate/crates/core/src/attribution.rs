//! Attribution ingestion: token scores are folded into sentence scores and
//! kept per (article, method), optionally per segment.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CleanArticle, SentenceSpan};

#[derive(Debug, Error)]
pub enum AttributionError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed attribution record: {message}")]
    Parse { line: usize, message: String },
    #[error("attribution refers to unknown article {0:?}")]
    UnknownArticle(String),
    #[error("method name must be non-empty")]
    EmptyMethod,
    #[error("{article_id}/{method}: expected {expected} scores, got {got}")]
    LengthMismatch {
        article_id: String,
        method: String,
        expected: usize,
        got: usize,
    },
    #[error("{article_id}/{method}: score {index} is not finite")]
    NonFinite {
        article_id: String,
        method: String,
        index: usize,
    },
    #[error("cannot align token {index} ({token:?}) with the article text")]
    Alignment { index: usize, token: String },
    #[error("duplicate attribution for {article_id}/{method}")]
    Duplicate { article_id: String, method: String },
    #[error("cannot normalize an empty score vector")]
    Empty,
    #[error("segment index {index} invalid for {len} sentences (indices must be in range and strictly increasing)")]
    SegmentIndex { index: usize, len: usize },
}

impl AttributionError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        AttributionError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Name of an attribution method. Stored lowercased so comparisons are
/// case-insensitive.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MethodId(String);

impl MethodId {
    pub const ATTENTION: &'static str = "attention";
    pub const DEEPLIFT: &'static str = "deeplift";
    pub const LIME: &'static str = "lime";
    pub const GRADIENT_SHAP: &'static str = "gradient_shap";

    pub fn new(name: &str) -> Result<Self, AttributionError> {
        let name = name.trim();
        if name.is_empty() {
            return Err(AttributionError::EmptyMethod);
        }
        Ok(MethodId(name.to_lowercase()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn defaults() -> Vec<MethodId> {
        [Self::ATTENTION, Self::DEEPLIFT, Self::LIME, Self::GRADIENT_SHAP]
            .iter()
            .map(|m| MethodId(m.to_string()))
            .collect()
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for MethodId {
    type Err = AttributionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MethodId::new(s)
    }
}

impl TryFrom<String> for MethodId {
    type Error = AttributionError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        MethodId::new(&s)
    }
}

impl From<MethodId> for String {
    fn from(m: MethodId) -> String {
        m.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenAttribution {
    pub article_id: String,
    pub method: MethodId,
    pub tokens: Vec<String>,
    pub scores: Vec<f64>,
    pub char_offsets: Option<Vec<(usize, usize)>>,
}

/// Sentence-level scores of one method for one article (or one segment).
#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub article_id: String,
    pub method: MethodId,
    pub scores: Vec<f64>,
}

impl Explanation {
    pub fn new(article_id: impl Into<String>, method: MethodId, scores: Vec<f64>) -> Self {
        Explanation {
            article_id: article_id.into(),
            method,
            scores,
        }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    fn check_finite(&self) -> Result<(), AttributionError> {
        match self.scores.iter().position(|s| !s.is_finite()) {
            Some(index) => Err(AttributionError::NonFinite {
                article_id: self.article_id.clone(),
                method: self.method.to_string(),
                index,
            }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    #[default]
    Sum,
    Mean,
}

impl FromStr for AggregationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sum" => Ok(AggregationMode::Sum),
            "mean" => Ok(AggregationMode::Mean),
            other => Err(format!("unknown aggregation mode {other:?} (expected sum or mean)")),
        }
    }
}

/// Where per-segment explanations come from during regional analysis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentSource {
    /// Attributions computed on the segment itself and imported as such.
    #[default]
    NativePerSegment,
    /// Article-level scores projected onto the segment's sentences.
    SliceArticleLevel,
}

impl FromStr for SegmentSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "native" | "native_per_segment" => Ok(SegmentSource::NativePerSegment),
            "slice" | "slice_article_level" => Ok(SegmentSource::SliceArticleLevel),
            other => Err(format!("unknown segment source {other:?} (expected native or slice)")),
        }
    }
}

/// Subword markers that stand for a preceding space.
fn is_token_space(c: char) -> bool {
    c.is_whitespace() || c == '\u{2581}' || c == '\u{0120}' || c == '\u{010A}'
}

const SPECIAL_TOKENS: [&str; 6] = ["<s>", "</s>", "<pad>", "<unk>", "<mask>", "<eos>"];

/// Index of the span each token belongs to, or `None` for tokens outside all
/// spans.
fn assign_tokens(attr: &TokenAttribution, spans: &[SentenceSpan]) -> Result<Vec<Option<usize>>, AttributionError> {
    if let Some(offsets) = &attr.char_offsets {
        if offsets.len() != attr.tokens.len() {
            return Err(AttributionError::LengthMismatch {
                article_id: attr.article_id.clone(),
                method: attr.method.to_string(),
                expected: attr.tokens.len(),
                got: offsets.len(),
            });
        }
        return Ok(offsets
            .iter()
            .map(|&(start, _)| {
                let i = spans.partition_point(|s| s.char_end <= start);
                spans.get(i).filter(|s| s.char_start <= start).map(|s| s.index)
            })
            .collect());
    }

    let text: Vec<(char, usize)> = spans
        .iter()
        .flat_map(|s| s.text.chars().map(move |c| (c, s.index)))
        .collect();
    let mut cursor = 0usize;
    let mut out = Vec::with_capacity(attr.tokens.len());
    for (index, token) in attr.tokens.iter().enumerate() {
        let wanted: Vec<char> = token.chars().filter(|&c| !is_token_space(c)).collect();
        if wanted.is_empty() {
            out.push(None);
            continue;
        }
        let mut pos = cursor;
        let mut first = None;
        let mut matched = 0;
        while matched < wanted.len() && pos < text.len() {
            let (c, span) = text[pos];
            if c.is_whitespace() {
                pos += 1;
                continue;
            }
            if c != wanted[matched] {
                break;
            }
            first.get_or_insert(span);
            matched += 1;
            pos += 1;
        }
        if matched == wanted.len() {
            cursor = pos;
            out.push(first);
        } else if SPECIAL_TOKENS.contains(&token.trim()) {
            out.push(None);
        } else {
            return Err(AttributionError::Alignment {
                index,
                token: token.clone(),
            });
        }
    }
    Ok(out)
}

/// Folds token scores into one score per sentence span.
pub fn aggregate_spans(
    attr: &TokenAttribution,
    spans: &[SentenceSpan],
    mode: AggregationMode,
) -> Result<Explanation, AttributionError> {
    if attr.tokens.len() != attr.scores.len() {
        return Err(AttributionError::LengthMismatch {
            article_id: attr.article_id.clone(),
            method: attr.method.to_string(),
            expected: attr.tokens.len(),
            got: attr.scores.len(),
        });
    }
    Explanation::new(attr.article_id.clone(), attr.method.clone(), attr.scores.clone()).check_finite()?;

    let assignment = assign_tokens(attr, spans)?;
    let mut sums = vec![0.0; spans.len()];
    let mut counts = vec![0usize; spans.len()];
    for (span, score) in assignment.iter().zip(&attr.scores) {
        if let Some(s) = *span {
            sums[s] += score;
            counts[s] += 1;
        }
    }
    if mode == AggregationMode::Mean {
        for (s, &n) in sums.iter_mut().zip(&counts) {
            if n > 0 {
                *s /= n as f64;
            }
        }
    }
    Ok(Explanation::new(attr.article_id.clone(), attr.method.clone(), sums))
}

/// `(s - min) / (max - min)`; a constant vector maps to all zeros.
pub fn normalize_minmax(scores: &[f64]) -> Result<Vec<f64>, AttributionError> {
    if scores.is_empty() {
        return Err(AttributionError::Empty);
    }
    if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
        return Err(AttributionError::NonFinite {
            article_id: String::new(),
            method: String::new(),
            index,
        });
    }
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if range == 0.0 {
        return Ok(vec![0.0; scores.len()]);
    }
    Ok(scores.iter().map(|s| ((s - min) / range).clamp(0.0, 1.0)).collect())
}

/// Projects an explanation onto a segment, re-indexed from 0.
pub fn slice_to_segment(expl: &Explanation, segment: &[usize]) -> Result<Explanation, AttributionError> {
    check_segment(segment, expl.len())?;
    Ok(Explanation::new(
        expl.article_id.clone(),
        expl.method.clone(),
        segment.iter().map(|&i| expl.scores[i]).collect(),
    ))
}

fn check_segment(segment: &[usize], len: usize) -> Result<(), AttributionError> {
    let mut prev: Option<usize> = None;
    for &i in segment {
        if i >= len || prev.is_some_and(|p| p >= i) {
            return Err(AttributionError::SegmentIndex { index: i, len });
        }
        prev = Some(i);
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AttributionRecord {
    article_id: String,
    method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tokens: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scores: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    char_offsets: Option<Vec<(usize, usize)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    segment: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sentence_scores: Option<Vec<f64>>,
}

/// Sentence-level explanations for a corpus, keyed by article and method.
/// Read-only once built.
#[derive(Debug, Clone, Default)]
pub struct AttributionStore {
    articles: Vec<String>,
    sentence_counts: HashMap<String, usize>,
    methods: Vec<MethodId>,
    explanations: BTreeMap<(String, MethodId), Explanation>,
    segments: BTreeMap<(String, MethodId, Vec<usize>), Explanation>,
}

impl AttributionStore {
    pub fn new(corpus: &[CleanArticle]) -> Self {
        AttributionStore {
            articles: corpus.iter().map(|a| a.id.clone()).collect(),
            sentence_counts: corpus.iter().map(|a| (a.id.clone(), a.sentence_count())).collect(),
            ..Default::default()
        }
    }

    pub fn articles(&self) -> &[String] {
        &self.articles
    }

    pub fn methods(&self) -> &[MethodId] {
        &self.methods
    }

    pub fn sentence_count(&self, article_id: &str) -> Option<usize> {
        self.sentence_counts.get(article_id).copied()
    }

    fn note_method(&mut self, m: &MethodId) {
        if !self.methods.contains(m) {
            self.methods.push(m.clone());
        }
    }

    fn expected_len(&self, expl: &Explanation) -> Result<usize, AttributionError> {
        self.sentence_count(&expl.article_id)
            .ok_or_else(|| AttributionError::UnknownArticle(expl.article_id.clone()))
    }

    /// Adds an article-level explanation after checking it against the corpus.
    pub fn insert(&mut self, expl: Explanation) -> Result<(), AttributionError> {
        let expected = self.expected_len(&expl)?;
        if expl.len() != expected {
            return Err(AttributionError::LengthMismatch {
                article_id: expl.article_id,
                method: expl.method.to_string(),
                expected,
                got: expl.scores.len(),
            });
        }
        expl.check_finite()?;
        let key = (expl.article_id.clone(), expl.method.clone());
        if self.explanations.contains_key(&key) {
            return Err(AttributionError::Duplicate {
                article_id: key.0,
                method: key.1.to_string(),
            });
        }
        self.note_method(&expl.method);
        self.explanations.insert(key, expl);
        Ok(())
    }

    /// Adds an explanation computed on a segment (sentence indices of the
    /// article, ascending). Scores are indexed by position in the segment.
    pub fn insert_segment(&mut self, segment: Vec<usize>, expl: Explanation) -> Result<(), AttributionError> {
        let n = self.expected_len(&expl)?;
        check_segment(&segment, n)?;
        if expl.len() != segment.len() {
            return Err(AttributionError::LengthMismatch {
                article_id: expl.article_id,
                method: expl.method.to_string(),
                expected: segment.len(),
                got: expl.scores.len(),
            });
        }
        expl.check_finite()?;
        let key = (expl.article_id.clone(), expl.method.clone(), segment);
        if self.segments.contains_key(&key) {
            return Err(AttributionError::Duplicate {
                article_id: key.0,
                method: key.1.to_string(),
            });
        }
        self.note_method(&expl.method);
        self.segments.insert(key, expl);
        Ok(())
    }

    pub fn get(&self, article_id: &str, method: &MethodId) -> Option<&Explanation> {
        self.explanations.get(&(article_id.to_owned(), method.clone()))
    }

    /// The explanation for a unit. A segment covering the whole article
    /// resolves to the article-level explanation under either source.
    pub fn resolve(
        &self,
        article_id: &str,
        method: &MethodId,
        segment: Option<&[usize]>,
        source: SegmentSource,
    ) -> Option<Explanation> {
        let Some(segment) = segment else {
            return self.get(article_id, method).cloned();
        };
        let whole = self
            .sentence_count(article_id)
            .is_some_and(|n| segment.len() == n && segment.iter().enumerate().all(|(i, &s)| i == s));
        if whole {
            return self.get(article_id, method).cloned();
        }
        match source {
            SegmentSource::NativePerSegment => self
                .segments
                .get(&(article_id.to_owned(), method.clone(), segment.to_vec()))
                .cloned(),
            SegmentSource::SliceArticleLevel => self
                .get(article_id, method)
                .and_then(|e| slice_to_segment(e, segment).ok()),
        }
    }

    /// (article, method) pairs of the roster with no article-level explanation.
    pub fn missing_pairs(&self) -> Vec<(String, MethodId)> {
        let mut out = Vec::new();
        for a in &self.articles {
            for m in &self.methods {
                if self.get(a, m).is_none() {
                    out.push((a.clone(), m.clone()));
                }
            }
        }
        out
    }

    /// Writes every stored explanation as sentence-level records, in corpus
    /// then roster order.
    pub fn write_sentence_level(&self, path: &Path) -> Result<(), AttributionError> {
        let file = File::create(path).map_err(|e| AttributionError::io(path, e))?;
        let mut f = std::io::BufWriter::new(file);
        for line in self.sentence_level_lines() {
            writeln!(f, "{line}").map_err(|e| AttributionError::io(path, e))?;
        }
        f.flush().map_err(|e| AttributionError::io(path, e))
    }

    pub fn sentence_level_lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        let record = |e: &Explanation, segment: Option<Vec<usize>>| AttributionRecord {
            article_id: e.article_id.clone(),
            method: e.method.to_string(),
            tokens: None,
            scores: None,
            char_offsets: None,
            segment,
            sentence_scores: Some(e.scores.clone()),
        };
        for a in &self.articles {
            for m in &self.methods {
                if let Some(e) = self.get(a, m) {
                    out.push(serde_json::to_string(&record(e, None)).expect("record serializes"));
                }
                for ((_, _, seg), e) in self
                    .segments
                    .range((a.clone(), m.clone(), Vec::new())..)
                    .take_while(|((sa, sm, _), _)| sa == a && sm == m)
                {
                    out.push(serde_json::to_string(&record(e, Some(seg.clone()))).expect("record serializes"));
                }
            }
        }
        out
    }
}

/// Reads an attribution file against a clean corpus. Token-level records are
/// aggregated onto the article's sentence spans; sentence-level records are
/// validated and stored as-is.
pub fn import_attributions(
    path: &Path,
    corpus: &[CleanArticle],
    mode: AggregationMode,
) -> Result<AttributionStore, AttributionError> {
    let file = File::open(path).map_err(|e| AttributionError::io(path, e))?;
    let lines = BufReader::new(file)
        .lines()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| AttributionError::io(path, e))?;
    import_lines(lines.iter().map(String::as_str), corpus, mode)
}

pub fn import_lines<'a>(
    lines: impl IntoIterator<Item = &'a str>,
    corpus: &[CleanArticle],
    mode: AggregationMode,
) -> Result<AttributionStore, AttributionError> {
    let by_id: HashMap<&str, &CleanArticle> = corpus.iter().map(|a| (a.id.as_str(), a)).collect();
    let mut store = AttributionStore::new(corpus);
    for (i, line) in lines.into_iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| AttributionError::Parse { line: i + 1, message };
        let rec: AttributionRecord = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        let method = MethodId::new(&rec.method)?;
        let article = by_id
            .get(rec.article_id.as_str())
            .ok_or_else(|| AttributionError::UnknownArticle(rec.article_id.clone()))?;

        match (rec.sentence_scores, rec.tokens, rec.scores) {
            (Some(scores), None, None) => {
                let expl = Explanation::new(rec.article_id, method, scores);
                match rec.segment {
                    Some(seg) => store.insert_segment(seg, expl)?,
                    None => store.insert(expl)?,
                }
            }
            (None, Some(tokens), Some(scores)) => {
                if rec.segment.is_some() {
                    return Err(parse_err("token-level records cannot carry a segment".into()));
                }
                let attr = TokenAttribution {
                    article_id: rec.article_id,
                    method,
                    tokens,
                    scores,
                    char_offsets: rec.char_offsets,
                };
                store.insert(aggregate_spans(&attr, &article.sentences, mode)?)?;
            }
            _ => {
                return Err(parse_err(
                    "expected either sentence_scores or tokens with scores".into(),
                ))
            }
        }
    }
    Ok(store)
}
