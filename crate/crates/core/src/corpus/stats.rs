use serde::{Deserialize, Serialize};

use super::CorpusSplit;
use crate::text::word_count;

/// Mean and maximum of one per-document quantity over `count` documents.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldStats {
    pub count: usize,
    pub mean: f64,
    pub max: usize,
}

impl FieldStats {
    fn from_values(values: impl Iterator<Item = usize>) -> Self {
        let (mut count, mut sum, mut max) = (0usize, 0u128, 0usize);
        for v in values {
            count += 1;
            sum += v as u128;
            max = max.max(v);
        }
        let mean = if count == 0 { 0.0 } else { sum as f64 / count as f64 };
        FieldStats { count, mean, max }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DensityStats {
    pub documents: usize,
    pub input_words: FieldStats,
    pub input_spans: FieldStats,
    /// Only documents that carry a reference summary contribute; `count` is
    /// zero (and every figure 0) when none do.
    pub summary_words: FieldStats,
    pub summary_spans: FieldStats,
}

/// Word and PII-span statistics for inputs and reference summaries.
/// `summary_span_count` counts PII spans in a summary text (typically the
/// rule detector).
pub fn pii_density_stats(
    split: &CorpusSplit,
    summary_span_count: impl Fn(&str) -> usize,
) -> DensityStats {
    let docs = &split.documents;
    let summaries = || docs.iter().filter_map(|d| d.reference_summary.as_deref());
    DensityStats {
        documents: docs.len(),
        input_words: FieldStats::from_values(docs.iter().map(|d| d.word_count)),
        input_spans: FieldStats::from_values(docs.iter().map(|d| d.pii_spans.len())),
        summary_words: FieldStats::from_values(summaries().map(word_count)),
        summary_spans: FieldStats::from_values(summaries().map(&summary_span_count)),
    }
}
