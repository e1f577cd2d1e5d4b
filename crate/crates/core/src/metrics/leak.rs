use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::category::PiiCategory;
use crate::date::scan_dates;
use crate::span::PiiSpan;
use crate::text::normalize_text;

/// Leaked and total source tokens of one category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryTokens {
    pub leaked: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakAccount {
    pub doc_id: String,
    /// P_d: private tokens in the source.
    pub source_private_tokens: usize,
    /// P_l: those that reappear in the summary.
    pub leaked_tokens: usize,
    pub leaked_spans_by_category: BTreeMap<PiiCategory, Vec<PiiSpan>>,
    pub tokens_by_category: BTreeMap<PiiCategory, CategoryTokens>,
    pub leaked: bool,
}

/// Summary tokens for leak matching: normalized word tokens plus the
/// canonical form of every date expression.
pub fn summary_tokens(summary: &str) -> Vec<String> {
    let mut out: Vec<String> = normalize_text(summary)
        .split_whitespace()
        .map(String::from)
        .collect();
    for m in scan_dates(summary) {
        // A bare year is already present as a plain token.
        if normalize_text(&summary[m.start..m.end]) != m.canonical {
            out.push(m.canonical);
        }
    }
    out
}

fn span_tokens(span: &PiiSpan) -> Vec<String> {
    let norm = if span.normalized.is_empty() {
        crate::span::normalize(span.category, &span.text)
    } else {
        span.normalized.clone()
    };
    norm.split_whitespace().map(String::from).collect()
}

/// Match source PII tokens against the summary. Each summary token can
/// account for at most one source token; source tokens are taken in span
/// order and claim the first free equal summary token.
pub fn leak_account(doc_id: &str, source_spans: &[PiiSpan], summary: &str) -> LeakAccount {
    let summary = summary_tokens(summary);
    let mut free: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, t) in summary.iter().enumerate().rev() {
        free.entry(t.as_str()).or_default().push(i);
    }
    let mut acct = LeakAccount {
        doc_id: String::from(doc_id),
        source_private_tokens: 0,
        leaked_tokens: 0,
        leaked_spans_by_category: BTreeMap::new(),
        tokens_by_category: BTreeMap::new(),
        leaked: false,
    };
    for span in source_spans {
        let mut span_hit = false;
        for tok in span_tokens(span) {
            let entry = acct.tokens_by_category.entry(span.category).or_default();
            entry.total += 1;
            acct.source_private_tokens += 1;
            if free.get_mut(tok.as_str()).and_then(|v| v.pop()).is_some() {
                entry.leaked += 1;
                acct.leaked_tokens += 1;
                span_hit = true;
            }
        }
        if span_hit {
            acct.leaked_spans_by_category
                .entry(span.category)
                .or_default()
                .push(span.clone());
        }
    }
    acct.leaked = acct.leaked_tokens > 0;
    acct
}

/// Mean of P_l / P_d over documents with P_d > 0.
pub fn ptr(accounts: &[LeakAccount]) -> Result<f64, MetricError> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for a in accounts.iter().filter(|a| a.source_private_tokens > 0) {
        sum += a.leaked_tokens as f64 / a.source_private_tokens as f64;
        n += 1;
    }
    if n == 0 {
        return Err(MetricError::Undefined("no document has private tokens"));
    }
    Ok(sum / n as f64)
}

/// Share of documents whose summary leaked at least one token (D_l / D_t).
pub fn ldr(accounts: &[LeakAccount]) -> Result<f64, MetricError> {
    if accounts.is_empty() {
        return Err(MetricError::Undefined("no documents"));
    }
    let leaked = accounts.iter().filter(|a| a.leaked).count();
    Ok(leaked as f64 / accounts.len() as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TprMode {
    /// A span counts when all its normalized tokens occur in the summary.
    #[default]
    Span,
    /// Leaked share of the category's tokens, one-to-one matched.
    Token,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Per-document rate, averaged over documents that contain the category.
    #[default]
    PerDocument,
    /// One rate over all spans (or tokens) of the category pooled together.
    Pooled,
}

fn doc_rate(
    spans: &[PiiSpan],
    summary: &str,
    category: PiiCategory,
    mode: TprMode,
) -> Option<(usize, usize)> {
    let of_cat: Vec<&PiiSpan> = spans.iter().filter(|s| s.category == category).collect();
    if of_cat.is_empty() {
        return None;
    }
    match mode {
        TprMode::Span => {
            let present: BTreeSet<String> = summary_tokens(summary).into_iter().collect();
            let hits = of_cat
                .iter()
                .filter(|s| {
                    let toks = span_tokens(s);
                    !toks.is_empty() && toks.iter().all(|t| present.contains(t))
                })
                .count();
            Some((hits, of_cat.len()))
        }
        TprMode::Token => {
            let acct = leak_account("", spans, summary);
            let c = acct.tokens_by_category.get(&category).copied().unwrap_or_default();
            (c.total > 0).then_some((c.leaked, c.total))
        }
    }
}

/// Rate at which source spans of `category` reappear in the summaries.
/// `docs` pairs each document's source spans with its summary.
pub fn tpr(
    docs: &[(&[PiiSpan], &str)],
    category: PiiCategory,
    mode: TprMode,
    averaging: Averaging,
) -> Result<f64, MetricError> {
    let rates: Vec<(usize, usize)> = docs
        .iter()
        .filter_map(|(spans, summary)| doc_rate(spans, summary, category, mode))
        .collect();
    if rates.is_empty() {
        return Err(MetricError::Undefined("no document contains the category"));
    }
    Ok(match averaging {
        Averaging::PerDocument => {
            rates.iter().map(|&(h, n)| h as f64 / n as f64).sum::<f64>() / rates.len() as f64
        }
        Averaging::Pooled => {
            let h: usize = rates.iter().map(|r| r.0).sum();
            let n: usize = rates.iter().map(|r| r.1).sum();
            h as f64 / n as f64
        }
    })
}

/// TPR for each category in `active` that occurs somewhere in `docs`.
pub fn tpr_by_category(
    docs: &[(&[PiiSpan], &str)],
    active: &BTreeSet<PiiCategory>,
    mode: TprMode,
    averaging: Averaging,
) -> BTreeMap<PiiCategory, f64> {
    active
        .iter()
        .filter_map(|&c| tpr(docs, c, mode, averaging).ok().map(|v| (c, v)))
        .collect()
}
