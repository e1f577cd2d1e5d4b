use alloc::string::String;
use alloc::vec::Vec;
use thiserror::Error;

use super::{f1, RougeScore};
use crate::text::metric_tokens;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmbeddingError {
    #[error("embedding provider failed: {0}")]
    Transport(String),
    #[error("provider returned {got} vectors for {expected} tokens")]
    CountMismatch { expected: usize, got: usize },
    #[error("vector dimensions differ ({0} vs {1})")]
    Dimension(usize, usize),
}

/// Something that maps tokens to vectors, one per token.
pub trait EmbeddingProvider {
    fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>, EmbeddingError>;
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = libm::sqrt(a.iter().map(|x| x * x).sum());
    let nb = libm::sqrt(b.iter().map(|x| x * x).sum());
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn embed_checked(
    provider: &dyn EmbeddingProvider,
    tokens: &[String],
    dim: &mut Option<usize>,
) -> Result<Vec<Vec<f64>>, EmbeddingError> {
    let vs = provider.embed(tokens)?;
    if vs.len() != tokens.len() {
        return Err(EmbeddingError::CountMismatch {
            expected: tokens.len(),
            got: vs.len(),
        });
    }
    for v in &vs {
        match *dim {
            None => *dim = Some(v.len()),
            Some(d) if d != v.len() => return Err(EmbeddingError::Dimension(d, v.len())),
            _ => {}
        }
    }
    Ok(vs)
}

fn greedy(from: &[Vec<f64>], to: &[Vec<f64>]) -> f64 {
    if from.is_empty() || to.is_empty() {
        return 0.0;
    }
    let total: f64 = from
        .iter()
        .map(|x| to.iter().map(|y| cosine(x, y)).fold(f64::NEG_INFINITY, f64::max))
        .sum();
    total / from.len() as f64
}

/// Greedy maximum-cosine matching between token embeddings in both
/// directions. Scores are clamped to [0, 1].
pub fn embedding_score(
    candidate: &str,
    reference: &str,
    provider: &dyn EmbeddingProvider,
) -> Result<RougeScore, EmbeddingError> {
    let ct = metric_tokens(candidate);
    let rt = metric_tokens(reference);
    let mut dim = None;
    let cv = embed_checked(provider, &ct, &mut dim)?;
    let rv = embed_checked(provider, &rt, &mut dim)?;
    let precision = greedy(&cv, &rv).clamp(0.0, 1.0);
    let recall = greedy(&rv, &cv).clamp(0.0, 1.0);
    Ok(RougeScore {
        precision,
        recall,
        f1: f1(precision, recall),
    })
}
