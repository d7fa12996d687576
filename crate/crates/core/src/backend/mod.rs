//! Vision-language backend contract.
//!
//! A [`Backend`] exposes a text encoder, a conditioned next-token
//! distribution, and a closed tokenizer. Image embeddings never flow through
//! the backend in this crate; they are read from EMB1 files (see [`emb1`]).
//!
//! Two implementations ship: [`ToyBackend`], a deterministic test double,
//! and [`RemoteBackend`], an HTTP client for a model server speaking the
//! `/v1` protocol.

pub mod emb1;
mod remote;
mod toy;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use emb1::{load_embeddings, write_embeddings};
pub use remote::RemoteBackend;
pub use toy::{ToyBackend, ToyBackendSpec, BOS_TOKEN, EOS_TOKEN};

pub type TokenId = u32;

/// Tolerance on the unit-norm contract for every embedding a backend returns.
pub const NORM_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendMeta {
    pub embed_dim: usize,
    pub vocab_size: usize,
    pub bos_id: TokenId,
    pub eos_id: TokenId,
}

impl BackendMeta {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim < 2 {
            return Err(Error::InvalidBackend(format!(
                "embed_dim must be at least 2, got {}",
                self.embed_dim
            )));
        }
        if self.bos_id == self.eos_id {
            return Err(Error::InvalidBackend("bos_id equals eos_id".into()));
        }
        let vocab = self.vocab_size as u64;
        if u64::from(self.bos_id) >= vocab || u64::from(self.eos_id) >= vocab {
            return Err(Error::InvalidBackend(
                "bos_id/eos_id outside the vocabulary".into(),
            ));
        }
        Ok(())
    }
}

/// A unit-norm vector in the shared text/image embedding space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// Normalizes `values` to unit Euclidean length.
    pub fn normalized(mut values: Vec<f64>) -> Result<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm <= f64::EPSILON {
            return Err(Error::ZeroNorm);
        }
        values.iter_mut().for_each(|v| *v /= norm);
        Ok(Embedding(values))
    }

    /// Wraps values that are already unit norm (checked within
    /// [`NORM_TOLERANCE`]).
    pub fn from_unit(values: Vec<f64>) -> Result<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "embedding norm {norm} is not 1"
            )));
        }
        Ok(Embedding(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Row-major matrix of unit-norm image embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn empty(dim: usize) -> Self {
        EmbeddingMatrix {
            dim,
            data: Vec::new(),
        }
    }

    /// Builds a matrix from raw rows, normalizing each one.
    pub fn from_rows(dim: usize, rows: impl IntoIterator<Item = Vec<f64>>) -> Result<Self> {
        let mut data = Vec::new();
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend(Embedding::normalized(row)?.into_inner());
        }
        Ok(EmbeddingMatrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        // chunks_exact panics on zero; a zero-dim matrix has no rows anyway
        self.data.chunks_exact(self.dim.max(1))
    }

    /// Keeps the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        EmbeddingMatrix {
            dim: self.dim,
            data,
        }
    }

    /// Dot product of `v` with every row.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        self.rows().map(|r| dot(r, v)).collect()
    }
}

/// Next-token log-probabilities over the whole vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistribution {
    log_probs: Vec<f64>,
}

impl TokenDistribution {
    /// Validates that `log_probs` are finite and normalized within 1e-6.
    pub fn from_log_probs(log_probs: Vec<f64>) -> Result<Self> {
        if log_probs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "log-probabilities contain NaN or infinity".into(),
            ));
        }
        let mass: f64 = log_probs.iter().map(|v| v.exp()).sum();
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "distribution mass {mass} is not 1"
            )));
        }
        Ok(TokenDistribution { log_probs })
    }

    /// Log-softmax of arbitrary finite logits.
    pub fn from_logits(logits: &[f64]) -> Result<Self> {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        Self::from_log_probs(logits.iter().map(|l| l - lse).collect())
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    pub fn prob(&self, id: TokenId) -> f64 {
        self.log_probs[id as usize].exp()
    }

    /// Token ids sorted by descending probability, lower id first on ties.
    pub fn ranked(&self) -> Vec<TokenId> {
        let mut ids: Vec<TokenId> = (0..self.log_probs.len() as TokenId).collect();
        ids.sort_by(|&a, &b| {
            self.log_probs[b as usize]
                .total_cmp(&self.log_probs[a as usize])
                .then(a.cmp(&b))
        });
        ids
    }

    pub fn argmax(&self) -> TokenId {
        self.ranked()[0]
    }
}

/// The model surface the decoders need.
///
/// Implementations must be usable concurrently from several threads and must
/// return unit-norm embeddings.
pub trait Backend: Send + Sync {
    fn meta(&self) -> BackendMeta;

    /// Encodes a batch of texts. Each text is trimmed first; empty texts are
    /// an error.
    fn encode_texts(&self, texts: &[String]) -> Result<Vec<Embedding>>;

    fn encode_text(&self, text: &str) -> Result<Embedding> {
        let mut out = self.encode_texts(&[text.to_string()])?;
        out.pop().ok_or(Error::EmptyText)
    }

    /// Distribution of the token following `prefix_ids`, which must begin
    /// with the BOS id, conditioned on an embedding.
    fn next_token(&self, prefix_ids: &[TokenId], condition: &Embedding) -> Result<TokenDistribution>;

    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>>;

    fn detokenize(&self, ids: &[TokenId]) -> Result<String>;

    /// Stable identifier of the model behind this backend, recorded in
    /// outputs for reproducibility.
    fn fingerprint(&self) -> String;
}

/// Parses `toy:<spec-path>` or `remote:<url>`.
pub fn open_backend(spec: &str) -> Result<Box<dyn Backend>> {
    if let Some(path) = spec.strip_prefix("toy:") {
        Ok(Box::new(ToyBackend::from_file(path)?))
    } else if let Some(url) = spec.strip_prefix("remote:") {
        Ok(Box::new(RemoteBackend::connect(url)?))
    } else {
        Err(Error::InvalidBackend(format!(
            "expected toy:<path> or remote:<url>, got `{spec}`"
        )))
    }
}

pub(crate) fn check_prefix(meta: &BackendMeta, prefix: &[TokenId], condition: &Embedding) -> Result<()> {
    if prefix.first() != Some(&meta.bos_id) {
        return Err(Error::MalformedPrefix { bos: meta.bos_id });
    }
    if let Some(&bad) = prefix.iter().find(|&&id| id as usize >= meta.vocab_size) {
        return Err(Error::UnknownTokenId(bad));
    }
    if condition.dim() != meta.embed_dim {
        return Err(Error::DimensionMismatch {
            expected: meta.embed_dim,
            got: condition.dim(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn meta_validation() {
        let ok = BackendMeta {
            embed_dim: 4,
            vocab_size: 10,
            bos_id: 0,
            eos_id: 1,
        };
        assert!(ok.validate().is_ok());
        assert!(BackendMeta { embed_dim: 1, ..ok }.validate().is_err());
        assert!(BackendMeta { eos_id: 0, ..ok }.validate().is_err());
        assert!(BackendMeta { bos_id: 10, ..ok }.validate().is_err());
    }

    #[test]
    fn distribution_from_logits_is_normalized() {
        let d = TokenDistribution::from_logits(&[1.0, 2.0, -3.0, 0.5]).unwrap();
        let mass: f64 = d.log_probs().iter().map(|l| l.exp()).sum();
        assert!((mass - 1.0).abs() < 1e-12);
        assert_eq!(d.argmax(), 1);
    }

    #[test]
    fn ranked_breaks_ties_by_lower_id() {
        let d = TokenDistribution::from_logits(&[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(d.ranked(), vec![1, 2, 0, 3]);
    }

    #[test]
    fn rejects_unnormalized_log_probs() {
        assert!(TokenDistribution::from_log_probs(vec![0.0, 0.0]).is_err());
        assert!(TokenDistribution::from_log_probs(vec![f64::NAN]).is_err());
    }

    #[test]
    fn zero_vector_does_not_normalize() {
        assert!(matches!(
            Embedding::normalized(vec![0.0; 3]),
            Err(Error::ZeroNorm)
        ));
    }

    #[test]
    fn unknown_backend_scheme() {
        assert!(matches!(
            open_backend("ftp://x"),
            Err(Error::InvalidBackend(_))
        ));
    }
}
