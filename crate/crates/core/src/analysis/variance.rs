use serde::{Deserialize, Serialize};

use crate::backend::{Embedding, EmbeddingMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    /// Population variance of each phrase's projections over the images.
    pub per_phrase: Vec<f64>,
    /// Mean projection of each phrase.
    pub means: Vec<f64>,
    /// Mean of `per_phrase`.
    pub overall: f64,
}

/// Mean over phrases of the variance of `E_T(s) . E_I(x)` across images.
pub fn variance_score(phrases: &[Embedding], images: &EmbeddingMatrix) -> Result<VarianceReport> {
    if phrases.is_empty() || images.is_empty() {
        return Err(Error::EmptySet);
    }
    let n = images.len() as f64;
    let mut per_phrase = Vec::with_capacity(phrases.len());
    let mut means = Vec::with_capacity(phrases.len());
    for p in phrases {
        if p.dim() != images.dim() {
            return Err(Error::DimensionMismatch {
                expected: images.dim(),
                got: p.dim(),
            });
        }
        let proj = images.project(p.as_slice());
        let mu = proj.iter().sum::<f64>() / n;
        per_phrase.push(proj.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n);
        means.push(mu);
    }
    let overall = per_phrase.iter().sum::<f64>() / per_phrase.len() as f64;
    Ok(VarianceReport {
        per_phrase,
        means,
        overall,
    })
}
