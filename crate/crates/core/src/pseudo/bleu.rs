use alloc::collections::BTreeMap;
use alloc::string::String;
use thiserror::Error;

use crate::text::metric_tokens;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BleuError {
    #[error("reference text has no tokens")]
    EmptyReference,
    #[error("max_n must be at least 1")]
    BadOrder,
}

fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut counts = BTreeMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram matches and candidate n-gram total for one order.
pub fn modified_precision(candidate: &[String], reference: &[String], n: usize) -> (usize, usize) {
    let cand = ngram_counts(candidate, n);
    let refc = ngram_counts(reference, n);
    let mut matched = 0;
    let mut total = 0;
    for (gram, &c) in &cand {
        total += c;
        matched += c.min(refc.get(gram).copied().unwrap_or(0));
    }
    (matched, total)
}

/// Sentence BLEU over metric tokens. Orders above one use add-one smoothing.
pub fn bleu(candidate: &str, reference: &str, max_n: usize) -> Result<f64, BleuError> {
    bleu_tokens(&metric_tokens(candidate), &metric_tokens(reference), max_n)
}

pub fn bleu_tokens(candidate: &[String], reference: &[String], max_n: usize) -> Result<f64, BleuError> {
    if max_n == 0 {
        return Err(BleuError::BadOrder);
    }
    if reference.is_empty() {
        return Err(BleuError::EmptyReference);
    }
    if candidate.is_empty() {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let (m, t) = modified_precision(candidate, reference, n);
        let p = if n == 1 {
            if m == 0 {
                return Ok(0.0);
            }
            m as f64 / t as f64
        } else {
            (m + 1) as f64 / (t + 1) as f64
        };
        log_sum += libm::log(p);
    }
    let c = candidate.len() as f64;
    let r = reference.len() as f64;
    let bp = if c > r { 1.0 } else { libm::exp(1.0 - r / c) };
    let score = bp * libm::exp(log_sum / max_n as f64);
    Ok(score.clamp(0.0, 1.0))
}
