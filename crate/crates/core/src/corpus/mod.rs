//! Documents, corpus splits, filtering, stratified sampling and density
//! statistics.

mod stats;
mod strata;

pub use stats::{pii_density_stats, DensityStats, FieldStats};
pub use strata::{
    stratified_indices, stratify, stratum_counts, stratum_target, Bin, StrataConfig, StratumCount,
    StratumKey,
};

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::span::{resolve_overlaps, PiiSpan, SpanError};
use crate::text::word_count;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceTask {
    #[default]
    Medical,
    Legal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Valid,
    #[default]
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate document id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("document `{doc_id}`: {source}")]
    Span { doc_id: String, source: SpanError },
    #[error("corpus split is empty")]
    EmptySplit,
    #[error("invalid strata config: {0}")]
    InvalidStrata(String),
}

/// A source record with its PII spans.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub body: String,
    pub reference_summary: Option<String>,
    pub source_task: SourceTask,
    pub pii_spans: Vec<PiiSpan>,
    pub word_count: usize,
}

impl Document {
    pub fn new(id: impl Into<String>, body: impl Into<String>, source_task: SourceTask) -> Self {
        let body = body.into();
        Document {
            id: id.into(),
            word_count: word_count(&body),
            body,
            reference_summary: None,
            source_task,
            pii_spans: Vec::new(),
        }
    }

    pub fn with_summary(mut self, summary: impl Into<String>) -> Self {
        self.reference_summary = Some(summary.into());
        self
    }

    /// Replaces the spans after validating them against the body; overlapping
    /// spans are resolved with the detector's rule.
    pub fn with_spans(mut self, spans: Vec<PiiSpan>) -> Result<Self, CorpusError> {
        for s in &spans {
            s.validate(&self.body).map_err(|source| CorpusError::Span {
                doc_id: self.id.clone(),
                source,
            })?;
        }
        let mut spans = resolve_overlaps(spans);
        spans.iter_mut().for_each(PiiSpan::ensure_normalized);
        self.pii_spans = spans;
        Ok(self)
    }

    pub fn set_body(&mut self, body: String) {
        self.word_count = word_count(&body);
        self.body = body;
    }
}

/// One record of a line-delimited corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: String,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_summary: Option<String>,
    #[serde(default)]
    pub task: SourceTask,
    #[serde(default)]
    pub pii_spans: Vec<PiiSpan>,
}

impl From<&Document> for DocumentRecord {
    fn from(d: &Document) -> Self {
        DocumentRecord {
            id: d.id.clone(),
            body: d.body.clone(),
            reference_summary: d.reference_summary.clone(),
            task: d.source_task,
            pii_spans: d.pii_spans.clone(),
        }
    }
}

impl TryFrom<DocumentRecord> for Document {
    type Error = CorpusError;
    fn try_from(r: DocumentRecord) -> Result<Self, CorpusError> {
        let mut doc = Document::new(r.id, r.body, r.task);
        doc.reference_summary = r.reference_summary;
        doc.with_spans(r.pii_spans)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusSplit {
    pub name: SplitName,
    pub documents: Vec<Document>,
}

impl CorpusSplit {
    /// Builds a split, rejecting duplicate ids. Line numbers in errors are
    /// 1-based positions in `documents`.
    pub fn new(name: SplitName, documents: Vec<Document>) -> Result<Self, CorpusError> {
        let mut seen = BTreeSet::new();
        for (i, d) in documents.iter().enumerate() {
            if !seen.insert(d.id.as_str()) {
                return Err(CorpusError::DuplicateId {
                    line: i + 1,
                    id: d.id.clone(),
                });
            }
        }
        Ok(CorpusSplit { name, documents })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }

    pub fn ids(&self) -> Vec<&str> {
        self.documents.iter().map(|d| d.id.as_str()).collect()
    }
}

/// Keeps the documents with at least one PII span, in order.
pub fn exclude_zero_pii(split: CorpusSplit) -> CorpusSplit {
    CorpusSplit {
        name: split.name,
        documents: split
            .documents
            .into_iter()
            .filter(|d| !d.pii_spans.is_empty())
            .collect(),
    }
}
