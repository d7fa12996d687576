//! Deterministic toy vision-language backend.
//!
//! Every vocabulary word owns a seeded Gaussian vector. A text embeds to the
//! normalized sum of the vectors of its distinct words, and the next-token
//! logits are `bigram_bias[last][w] + condition_scale * vec(w) . condition`.
//! The result is a pure function of the spec and the inputs.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{check_prefix, Backend, BackendMeta, Embedding, TokenDistribution, TokenId};
use crate::error::{Error, Result};

pub const BOS_TOKEN: &str = "<bos>";
pub const EOS_TOKEN: &str = "<eos>";

/// Logit offset applied to BOS so it is never proposed as a continuation.
const BOS_PENALTY: f64 = 1e3;

fn default_condition_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyBackendSpec {
    pub vocab: Vec<String>,
    pub seed: u64,
    pub embed_dim: usize,
    /// Dense `vocab x vocab` table; row = previous token, column = next.
    pub bigram_bias: Vec<Vec<f64>>,
    #[serde(default = "default_condition_scale")]
    pub condition_scale: f64,
}

impl ToyBackendSpec {
    /// Spec with an all-zero bigram table.
    pub fn uniform(vocab: Vec<String>, seed: u64, embed_dim: usize) -> Self {
        let n = vocab.len();
        ToyBackendSpec {
            vocab,
            seed,
            embed_dim,
            bigram_bias: vec![vec![0.0; n]; n],
            condition_scale: 1.0,
        }
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.vocab.iter().position(|w| w == word)
    }

    /// Sets `bigram_bias[prev][next]`. Panics if either word is missing,
    /// which is only ever a fixture-construction bug.
    pub fn set_bias(&mut self, prev: &str, next: &str, value: f64) {
        let p = self.index_of(prev).unwrap_or_else(|| panic!("unknown word {prev}"));
        let n = self.index_of(next).unwrap_or_else(|| panic!("unknown word {next}"));
        self.bigram_bias[p][n] = value;
    }

    fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidBackend(m));
        if self.embed_dim < 2 {
            return invalid(format!("embed_dim must be at least 2, got {}", self.embed_dim));
        }
        let mut seen = HashSet::new();
        for w in &self.vocab {
            if w.is_empty() || w.chars().any(char::is_whitespace) {
                return invalid(format!("vocabulary entry {w:?} is empty or contains whitespace"));
            }
            if !seen.insert(w.as_str()) {
                return invalid(format!("duplicate vocabulary entry `{w}`"));
            }
        }
        if !seen.contains(BOS_TOKEN) || !seen.contains(EOS_TOKEN) {
            return invalid(format!("vocabulary must contain {BOS_TOKEN} and {EOS_TOKEN}"));
        }
        let n = self.vocab.len();
        if self.bigram_bias.len() != n || self.bigram_bias.iter().any(|r| r.len() != n) {
            return invalid(format!("bigram_bias must be {n}x{n}"));
        }
        if self.bigram_bias.iter().flatten().any(|v| !v.is_finite()) || !self.condition_scale.is_finite() {
            return invalid("bigram_bias and condition_scale must be finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ToyBackend {
    spec: ToyBackendSpec,
    meta: BackendMeta,
    index: HashMap<String, TokenId>,
    /// Row-major `vocab x embed_dim` unit vectors.
    word_vectors: Vec<f64>,
    fingerprint: String,
}

impl ToyBackend {
    pub fn new(spec: ToyBackendSpec) -> Result<Self> {
        spec.validate()?;
        let dim = spec.embed_dim;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut word_vectors = Vec::with_capacity(spec.vocab.len() * dim);
        for _ in &spec.vocab {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            word_vectors.extend(Embedding::normalized(v)?.into_inner());
        }
        let index: HashMap<String, TokenId> = spec
            .vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as TokenId))
            .collect();
        let meta = BackendMeta {
            embed_dim: dim,
            vocab_size: spec.vocab.len(),
            bos_id: index[BOS_TOKEN],
            eos_id: index[EOS_TOKEN],
        };
        let canonical = serde_json::to_vec(&spec)?;
        let fingerprint = format!("toy:{}", hex::encode(&Sha256::digest(&canonical)[..8]));
        Ok(ToyBackend {
            spec,
            meta,
            index,
            word_vectors,
            fingerprint,
        })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::new(serde_json::from_str(&text)?)
    }

    pub fn spec(&self) -> &ToyBackendSpec {
        &self.spec
    }

    pub fn token_id(&self, word: &str) -> Option<TokenId> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: TokenId) -> Option<&str> {
        self.spec.vocab.get(id as usize).map(String::as_str)
    }

    pub fn word_vector(&self, id: TokenId) -> &[f64] {
        let d = self.meta.embed_dim;
        let i = id as usize;
        &self.word_vectors[i * d..(i + 1) * d]
    }

    fn is_special(&self, id: TokenId) -> bool {
        id == self.meta.bos_id || id == self.meta.eos_id
    }

    fn encode_one(&self, text: &str) -> Result<Embedding> {
        let ids = self.tokenize(text)?;
        let mut distinct: Vec<TokenId> = ids.into_iter().filter(|&id| !self.is_special(id)).collect();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.is_empty() {
            return Err(Error::EmptyText);
        }
        let mut sum = vec![0.0; self.meta.embed_dim];
        for id in distinct {
            for (s, v) in sum.iter_mut().zip(self.word_vector(id)) {
                *s += v;
            }
        }
        Embedding::normalized(sum)
    }
}

impl Backend for ToyBackend {
    fn meta(&self) -> BackendMeta {
        self.meta
    }

    fn encode_texts(&self, texts: &[String]) -> Result<Vec<Embedding>> {
        texts.iter().map(|t| self.encode_one(t)).collect()
    }

    fn next_token(&self, prefix_ids: &[TokenId], condition: &Embedding) -> Result<TokenDistribution> {
        check_prefix(&self.meta, prefix_ids, condition)?;
        let last = *prefix_ids.last().unwrap() as usize;
        let bias = &self.spec.bigram_bias[last];
        let logits: Vec<f64> = (0..self.meta.vocab_size)
            .map(|w| {
                let id = w as TokenId;
                let mut l = bias[w] + self.spec.condition_scale * condition.dot(self.word_vector(id));
                if id == self.meta.bos_id {
                    l -= BOS_PENALTY;
                }
                l
            })
            .collect();
        TokenDistribution::from_logits(&logits)
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>> {
        text.split_whitespace()
            .map(|w| self.token_id(w).ok_or_else(|| Error::OutOfVocabulary(w.to_string())))
            .collect()
    }

    fn detokenize(&self, ids: &[TokenId]) -> Result<String> {
        let mut words = Vec::with_capacity(ids.len());
        for &id in ids {
            let w = self.word(id).ok_or(Error::UnknownTokenId(id))?;
            if !self.is_special(id) {
                words.push(w);
            }
        }
        Ok(words.join(" "))
    }

    fn fingerprint(&self) -> String {
        self.fingerprint.clone()
    }
}
