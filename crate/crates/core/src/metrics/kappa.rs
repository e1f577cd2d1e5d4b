use alloc::collections::BTreeMap;

use super::MetricError;

/// Cohen's kappa between two label sequences.
pub fn cohens_kappa<T: Ord>(a: &[T], b: &[T]) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricError::Empty);
    }
    let n = a.len() as f64;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64;
    let mut ma: BTreeMap<&T, usize> = BTreeMap::new();
    let mut mb: BTreeMap<&T, usize> = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        *ma.entry(x).or_insert(0) += 1;
        *mb.entry(y).or_insert(0) += 1;
    }
    let p_o = agree / n;
    let p_e: f64 = ma
        .iter()
        .map(|(k, &ca)| ca as f64 * mb.get(k).copied().unwrap_or(0) as f64)
        .sum::<f64>()
        / (n * n);
    if (1.0 - p_e).abs() < 1e-15 {
        return Ok(1.0);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}
