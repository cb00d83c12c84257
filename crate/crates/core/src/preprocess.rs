//! Period normalization and protection applied to raw article text before
//! sentence splitting.
//!
//! Sentences are detected by periods alone, so every period that does not end
//! a sentence has to be either normalized away or swapped for a placeholder
//! token. Normalization (quotes, termination, redundant periods, question
//! marks) is applied first; protection of initials, web addresses, e-mail
//! addresses and decimal numbers last. Only the protections are recorded, so
//! they can be undone with [`restore_protected`].

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper bound on normalization passes. Every rule is monotone so the loop
/// settles after two or three passes on real text.
const MAX_NORMALIZE_PASSES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Placeholder {
    #[serde(rename = "[NAME_PERIOD_TOKEN]")]
    Name,
    #[serde(rename = "[WEB_PERIOD_TOKEN]")]
    Web,
    #[serde(rename = "[EMAIL_PERIOD_TOKEN]")]
    Email,
    #[serde(rename = "[NUMBER_PERIOD_TOKEN]")]
    Number,
}

impl Placeholder {
    pub const ALL: [Placeholder; 4] = [
        Placeholder::Name,
        Placeholder::Web,
        Placeholder::Email,
        Placeholder::Number,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Placeholder::Name => "[NAME_PERIOD_TOKEN]",
            Placeholder::Web => "[WEB_PERIOD_TOKEN]",
            Placeholder::Email => "[EMAIL_PERIOD_TOKEN]",
            Placeholder::Number => "[NUMBER_PERIOD_TOKEN]",
        }
    }

    fn char_len(self) -> usize {
        self.token().chars().count()
    }
}

impl fmt::Display for Placeholder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// One recorded substitution. `offset` is the character offset of the
/// placeholder in the protected text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Protection {
    pub offset: usize,
    pub placeholder: Placeholder,
    pub original: String,
}

/// Ordered (by offset) list of protections applied to a text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProtectionMap(pub Vec<Protection>);

impl ProtectionMap {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Protection> {
        self.0.iter()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IntegrityError {
    #[error("protection map records {expected} placeholders but text contains {found}")]
    CountMismatch { expected: usize, found: usize },
    #[error("expected {placeholder} at character offset {offset}")]
    Missing { offset: usize, placeholder: Placeholder },
}

/// Runs all six rules and returns the cleaned text with the protections that
/// were applied.
pub fn preprocess_text(text: &str) -> (String, ProtectionMap) {
    protect(&normalize(text))
}

/// Quote, termination, redundant-period and question-mark rules, iterated to
/// a fixpoint.
pub fn normalize(text: &str) -> String {
    let mut current = text.to_owned();
    for _ in 0..MAX_NORMALIZE_PASSES {
        let next = normalize_questions(&collapse_periods(&terminate_lines(&move_periods_into_quotes(&current))));
        if next == current {
            break;
        }
        current = next;
    }
    current
}

fn move_periods_into_quotes(text: &str) -> String {
    let mut out = text.to_owned();
    loop {
        let next = out.replace("\" .", "\".").replace("\".", ".\"");
        if next == out {
            return out;
        }
        out = next;
    }
}

fn terminate_lines(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 8);
    for (i, line) in text.split('\n').enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let body = line.trim_end();
        let trailing_ws = &line[body.len()..];
        if body.is_empty() {
            out.push_str(line);
            continue;
        }
        let unquoted = body.trim_end_matches('"');
        if unquoted.ends_with('.') {
            out.push_str(line);
        } else {
            // Period goes before any closing quotes.
            out.push_str(unquoted);
            out.push('.');
            out.push_str(&body[unquoted.len()..]);
            out.push_str(trailing_ws);
        }
    }
    out
}

fn collapse_periods(text: &str) -> String {
    static RUNS: OnceLock<Regex> = OnceLock::new();
    let re = RUNS.get_or_init(|| Regex::new(r"\.{2,}").unwrap());
    re.replace_all(text, ".").into_owned()
}

/// `?.` and `? .` become `?.`; a bare `?` before whitespace or the end of the
/// text gets a terminal period.
fn normalize_questions(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len() + 4);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        out.push(c);
        i += 1;
        if c != '?' {
            continue;
        }
        let mut j = i;
        while j < chars.len() && (chars[j] == ' ' || chars[j] == '\t') {
            j += 1;
        }
        if j < chars.len() && chars[j] == '.' {
            out.push('.');
            i = j + 1;
        } else if i == chars.len() || chars[i].is_whitespace() {
            out.push('.');
        }
    }
    out
}

/// Replaces non-terminal periods in initials, web addresses, e-mail addresses
/// and decimal numbers with placeholder tokens.
pub fn protect(text: &str) -> (String, ProtectionMap) {
    let claims = classify_periods(text);
    let mut out = String::with_capacity(text.len() + claims.len() * 20);
    let mut map = Vec::with_capacity(claims.len());
    let mut out_chars = 0usize;
    for (byte, c) in text.char_indices() {
        match claims.get(&byte) {
            Some(&placeholder) => {
                map.push(Protection {
                    offset: out_chars,
                    placeholder,
                    original: c.to_string(),
                });
                out.push_str(placeholder.token());
                out_chars += placeholder.char_len();
            }
            None => {
                out.push(c);
                out_chars += 1;
            }
        }
    }
    (out, ProtectionMap(map))
}

/// Maps byte offsets of protected periods to their placeholder. E-mail
/// addresses are claimed first so their domains are not read as web
/// addresses; then web addresses, initials and decimal numbers.
fn classify_periods(text: &str) -> BTreeMap<usize, Placeholder> {
    static EMAIL: OnceLock<Regex> = OnceLock::new();
    static HOST: OnceLock<Regex> = OnceLock::new();
    let email = EMAIL.get_or_init(|| {
        Regex::new(r"[A-Za-z0-9_%+\-]+(?:\.[A-Za-z0-9_%+\-]+)*@[A-Za-z0-9\-]+(?:\.[A-Za-z0-9\-]+)+").unwrap()
    });
    let host = HOST.get_or_init(|| Regex::new(r"[A-Za-z0-9\-]+(?:\.[A-Za-z0-9\-]+)+").unwrap());

    let mut claims = BTreeMap::new();
    for m in email.find_iter(text) {
        for (i, b) in m.as_str().bytes().enumerate() {
            if b == b'.' {
                claims.insert(m.start() + i, Placeholder::Email);
            }
        }
    }

    for m in host.find_iter(text) {
        let s = m.as_str();
        let dots: Vec<usize> = s
            .bytes()
            .enumerate()
            .filter(|&(_, b)| b == b'.')
            .map(|(i, _)| m.start() + i)
            .collect();
        if dots.iter().any(|d| claims.contains_key(d)) {
            continue;
        }
        let is_web = s.to_ascii_lowercase().starts_with("www.")
            || (dots.len() >= 2 && s.bytes().any(|b| b.is_ascii_alphabetic()));
        if is_web {
            for d in dots {
                claims.insert(d, Placeholder::Web);
            }
        }
    }

    let chars: Vec<(usize, char)> = text.char_indices().collect();
    for (i, &(byte, c)) in chars.iter().enumerate() {
        if c != '.' || claims.contains_key(&byte) || i == 0 {
            continue;
        }
        let prev = chars[i - 1].1;
        let next = chars.get(i + 1).map(|&(_, c)| c);
        if is_name_initial(&chars, i) {
            claims.insert(byte, Placeholder::Name);
        } else if prev.is_ascii_digit() && next.is_some_and(|n| n.is_ascii_digit()) {
            claims.insert(byte, Placeholder::Number);
        }
    }
    claims
}

/// A single uppercase letter, a period, horizontal whitespace, then another
/// uppercase letter.
fn is_name_initial(chars: &[(usize, char)], dot: usize) -> bool {
    let letter = chars[dot - 1].1;
    if !letter.is_uppercase() {
        return false;
    }
    if dot >= 2 && chars[dot - 2].1.is_alphanumeric() {
        return false;
    }
    let mut j = dot + 1;
    while j < chars.len() && (chars[j].1 == ' ' || chars[j].1 == '\t') {
        j += 1;
    }
    j > dot + 1 && j < chars.len() && chars[j].1.is_uppercase()
}

/// Undoes [`protect`]. The text must contain exactly the placeholders the map
/// records, at the recorded offsets.
pub fn restore_protected(text: &str, map: &ProtectionMap) -> Result<String, IntegrityError> {
    let found: usize = Placeholder::ALL.iter().map(|p| text.matches(p.token()).count()).sum();
    if found != map.len() {
        return Err(IntegrityError::CountMismatch {
            expected: map.len(),
            found,
        });
    }

    let byte_of_char: Vec<usize> = text
        .char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(text.len()))
        .collect();
    let mut out = text.to_owned();
    for p in map.iter().rev() {
        let start = *byte_of_char.get(p.offset).ok_or(IntegrityError::Missing {
            offset: p.offset,
            placeholder: p.placeholder,
        })?;
        let end = start + p.placeholder.token().len();
        if text.get(start..end) != Some(p.placeholder.token()) {
            return Err(IntegrityError::Missing {
                offset: p.offset,
                placeholder: p.placeholder,
            });
        }
        out.replace_range(start..end, &p.original);
    }
    Ok(out)
}
