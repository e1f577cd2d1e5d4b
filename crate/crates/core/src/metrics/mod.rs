//! Leakage metrics (PTR, LDR, TPR), ROUGE, Cohen's kappa and an
//! embedding-matching score.

mod embedding;
mod kappa;
mod leak;
mod rouge;

use thiserror::Error;

pub use embedding::{embedding_score, EmbeddingError, EmbeddingProvider};
pub use kappa::cohens_kappa;
pub use leak::{
    ldr, leak_account, ptr, summary_tokens, tpr, tpr_by_category, Averaging, CategoryTokens,
    LeakAccount, TprMode,
};
pub use rouge::{rouge, rouge_tokens, RougeScore, RougeVariant};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("metric undefined: {0}")]
    Undefined(&'static str),
    #[error("reference text has no tokens")]
    EmptyReference,
    #[error("label sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no labels given")]
    Empty,
}

pub(crate) fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}
