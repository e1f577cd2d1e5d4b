use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use serde::{Deserialize, Serialize};

use super::{f1, MetricError};
use crate::text::metric_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RougeVariant {
    #[serde(rename = "rouge1")]
    R1,
    #[serde(rename = "rouge2")]
    R2,
    #[serde(rename = "rougeL")]
    RL,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    fn from_counts(hits: usize, cand: usize, refn: usize) -> Self {
        let precision = if cand == 0 { 0.0 } else { hits as f64 / cand as f64 };
        let recall = if refn == 0 { 0.0 } else { hits as f64 / refn as f64 };
        RougeScore {
            precision,
            recall,
            f1: f1(precision, recall),
        }
    }
}

fn grams(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut m = BTreeMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

fn lcs(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge(candidate: &str, reference: &str, variant: RougeVariant) -> Result<RougeScore, MetricError> {
    rouge_tokens(&metric_tokens(candidate), &metric_tokens(reference), variant)
}

pub fn rouge_tokens(
    candidate: &[String],
    reference: &[String],
    variant: RougeVariant,
) -> Result<RougeScore, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let n = match variant {
        RougeVariant::R1 => 1,
        RougeVariant::R2 => 2,
        RougeVariant::RL => {
            let l = lcs(candidate, reference);
            return Ok(RougeScore::from_counts(l, candidate.len(), reference.len()));
        }
    };
    let c = grams(candidate, n);
    let r = grams(reference, n);
    let cn: usize = c.values().sum();
    let rn: usize = r.values().sum();
    if cn == 0 && rn == 0 {
        // Too short for this order: identical texts still agree fully.
        let same = candidate == reference;
        let v = if same { 1.0 } else { 0.0 };
        return Ok(RougeScore {
            precision: v,
            recall: v,
            f1: v,
        });
    }
    let hits = c
        .iter()
        .map(|(g, &k)| k.min(r.get(g).copied().unwrap_or(0)))
        .sum();
    Ok(RougeScore::from_counts(hits, cn, rn))
}
