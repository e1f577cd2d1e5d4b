use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::category::PiiCategory;
use crate::date::canonicalize_date;
use crate::text::{char_len, normalize_text, slice_chars};

/// A labeled character range. Offsets count Unicode scalar values, 0-based,
/// half-open.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiiSpan {
    pub start: usize,
    pub end: usize,
    pub category: PiiCategory,
    pub text: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub normalized: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpanError {
    #[error("span {start}..{end} is outside the text ({len} chars)")]
    OutOfBounds { start: usize, end: usize, len: usize },
    #[error("span {start}..{end} text `{claimed}` does not match `{actual}`")]
    TextMismatch {
        start: usize,
        end: usize,
        claimed: String,
        actual: String,
    },
    #[error("span {start}..{end} is empty")]
    Empty { start: usize, end: usize },
}

impl PiiSpan {
    pub fn new(start: usize, end: usize, category: PiiCategory, text: impl Into<String>) -> Self {
        let text = text.into();
        let normalized = normalize(category, &text);
        PiiSpan {
            start,
            end,
            category,
            text,
            normalized,
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &PiiSpan) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// Fills `normalized` when it was absent from a file.
    pub fn ensure_normalized(&mut self) {
        if self.normalized.is_empty() {
            self.normalized = normalize(self.category, &self.text);
        }
    }

    /// Checks bounds and that `text` is the slice of `body` it claims.
    pub fn validate(&self, body: &str) -> Result<(), SpanError> {
        if self.is_empty() {
            return Err(SpanError::Empty {
                start: self.start,
                end: self.end,
            });
        }
        let len = char_len(body);
        let slice = slice_chars(body, self.start, self.end).ok_or(SpanError::OutOfBounds {
            start: self.start,
            end: self.end,
            len,
        })?;
        if slice != self.text {
            return Err(SpanError::TextMismatch {
                start: self.start,
                end: self.end,
                claimed: self.text.clone(),
                actual: String::from(slice),
            });
        }
        Ok(())
    }

    /// Whitespace-separated tokens of the normalized form. A canonical date is
    /// a single token.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.normalized.split(' ').filter(|t| !t.is_empty())
    }
}

/// Canonical surface form: dates in ISO form, ages as their number, anything
/// else lowercased with punctuation stripped. Never empty for non-blank input.
pub fn normalize(category: PiiCategory, text: &str) -> String {
    let canonical = match category {
        PiiCategory::DateTime => canonicalize_date(text),
        PiiCategory::Age => age_number(text),
        _ => None,
    };
    let out = canonical.unwrap_or_else(|| normalize_text(text));
    if out.is_empty() {
        return text.trim().to_lowercase();
    }
    out
}

fn age_number(text: &str) -> Option<String> {
    let start = text.find(|c: char| c.is_ascii_digit())?;
    let digits = text[start..]
        .split(|c: char| !c.is_ascii_digit())
        .next()
        .unwrap_or("");
    let trimmed = digits.trim_start_matches('0');
    Some(String::from(if trimmed.is_empty() { "0" } else { trimmed }))
}

/// Resolves overlaps: longest span first, ties by category priority, then by
/// earlier start. The survivors are returned sorted by start.
pub fn resolve_overlaps(mut candidates: Vec<PiiSpan>) -> Vec<PiiSpan> {
    candidates.sort_by(|a, b| {
        b.len()
            .cmp(&a.len())
            .then(a.category.priority().cmp(&b.category.priority()))
            .then(a.start.cmp(&b.start))
    });
    let mut kept: Vec<PiiSpan> = Vec::with_capacity(candidates.len());
    for cand in candidates {
        if cand.is_empty() {
            continue;
        }
        // `kept` stays sorted by start so the neighbours are enough to check.
        let pos = kept.partition_point(|k| k.start < cand.start);
        let clash_prev = pos > 0 && kept[pos - 1].overlaps(&cand);
        let clash_next = pos < kept.len() && kept[pos].overlaps(&cand);
        if !clash_prev && !clash_next {
            kept.insert(pos, cand);
        }
    }
    kept
}
