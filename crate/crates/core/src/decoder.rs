//! Guided autoregressive decoding of the average phrase and the principal
//! phrases.
//!
//! Both decoders condition the backend on the normalized mean image
//! embedding. The average phrase reshapes each step's truncated distribution
//! with the hypernym rules of [`crate::lexgraph`]. Principal phrase `i`
//! scores each of the `pc_top_k` most likely next tokens `k` as
//!
//! ```text
//! log p(k) + lambda_v * V(s_k) - lambda_o * O(s_k)
//! ```
//!
//! where `s_k` is the partial phrase ending in `k`, `V` is the spread of its
//! (average-phrase-centered) matching scores over the images and `O` is its
//! summed similarity to phrases `1..i`.

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::{dot, Backend, Embedding, EmbeddingMatrix, TokenDistribution, TokenId};
use crate::error::{Error, Result};
use crate::lexgraph::{aggregate, truncate_top_k_masked, BackendLexicon, LexicalGraph, RuleEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Sampling {
    Greedy,
    TopKSample { k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GuidanceConfig {
    pub lambda_v: f64,
    pub lambda_o: f64,
    pub avg_top_k: usize,
    pub pc_top_k: usize,
    pub max_avg_tokens: usize,
    pub max_pc_tokens: usize,
    pub num_phrases: usize,
    pub prompt: String,
    pub seed: u64,
    pub sampling: Sampling,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        GuidanceConfig {
            lambda_v: 5.0,
            lambda_o: 10.0,
            avg_top_k: 12,
            pc_top_k: 1000,
            max_avg_tokens: 5,
            max_pc_tokens: 3,
            num_phrases: 7,
            prompt: "image of a".into(),
            seed: 0,
            sampling: Sampling::Greedy,
        }
    }
}

impl GuidanceConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if !(self.lambda_v >= 0.0 && self.lambda_o >= 0.0) || !self.lambda_v.is_finite() || !self.lambda_o.is_finite() {
            return bad("lambda_v and lambda_o must be finite and non-negative");
        }
        if self.avg_top_k == 0 || self.pc_top_k == 0 {
            return bad("top-k sizes must be at least 1");
        }
        if self.max_avg_tokens == 0 || self.max_pc_tokens == 0 {
            return bad("maximum phrase lengths must be at least 1");
        }
        if self.num_phrases == 0 {
            return bad("num_phrases must be at least 1");
        }
        if let Sampling::TopKSample { k: 0 } = self.sampling {
            return bad("top_k_sample needs k >= 1");
        }
        Ok(())
    }
}

/// Mean of the image rows, renormalized to unit length.
pub fn mean_embedding(images: &EmbeddingMatrix) -> Result<Embedding> {
    if images.is_empty() {
        return Err(Error::EmptySet);
    }
    let n = images.len() as f64;
    let mut mean = vec![0.0; images.dim()];
    for row in images.rows() {
        mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    // antipodal or otherwise cancelling sets leave nothing to condition on
    let norm = dot(&mean, &mean).sqrt();
    if norm < 1e-9 {
        return Err(Error::DegenerateMean);
    }
    Embedding::normalized(mean).map_err(|_| Error::DegenerateMean)
}

/// `V`: sum of squared deviations of `(candidate - s0) . x` over the images.
pub fn variance_term(candidate: &[f64], s0: &[f64], images: &EmbeddingMatrix) -> f64 {
    if images.len() < 2 {
        return 0.0;
    }
    let centered: Vec<f64> = candidate.iter().zip(s0).map(|(c, s)| c - s).collect();
    let scores = images.project(&centered);
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    scores.iter().map(|m| (m - mean).powi(2)).sum()
}

/// `O`: summed dot product of the candidate with every previous phrase.
pub fn orthogonality_term(candidate: &[f64], previous: &[Embedding]) -> f64 {
    previous.iter().map(|p| p.dot(candidate)).sum()
}

/// Where a decode stands: the full prefix (BOS, prompt, generated tokens).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecodeState {
    pub prefix_ids: Vec<TokenId>,
    pub prompt_len: usize,
}

impl DecodeState {
    pub fn start(backend: &dyn Backend, prompt: &str) -> Result<Self> {
        let mut prefix_ids = vec![backend.meta().bos_id];
        prefix_ids.extend(backend.tokenize(prompt)?);
        let prompt_len = prefix_ids.len();
        Ok(DecodeState { prefix_ids, prompt_len })
    }

    pub fn step(&self) -> usize {
        self.prefix_ids.len() - self.prompt_len
    }

    pub fn generated(&self) -> &[TokenId] {
        &self.prefix_ids[self.prompt_len..]
    }

    /// Tokens that may not be emitted next: BOS always, EOS before the first
    /// generated token.
    pub fn masked(&self, backend: &dyn Backend) -> Vec<TokenId> {
        let meta = backend.meta();
        if self.step() == 0 {
            vec![meta.bos_id, meta.eos_id]
        } else {
            vec![meta.bos_id]
        }
    }
}

/// One next-token candidate of a principal-phrase step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredCandidate {
    pub token: TokenId,
    /// The partial phrase the candidate would produce.
    pub text: String,
    pub log_prob: f64,
    pub variance: f64,
    pub orthogonality: f64,
    /// `log_prob + lambda_v * variance - lambda_o * orthogonality`.
    pub score: f64,
    /// Softmax of `score` over the candidate set.
    pub potential: f64,
    #[serde(skip)]
    pub embedding: Embedding,
}

/// Scores the `pc_top_k` most likely tokens of `dist`.
pub fn modified_potentials(
    state: &DecodeState,
    dist: &TokenDistribution,
    images: &EmbeddingMatrix,
    s0: &Embedding,
    previous: &[Embedding],
    config: &GuidanceConfig,
    backend: &dyn Backend,
) -> Result<Vec<ScoredCandidate>> {
    let eos = backend.meta().eos_id;
    let masked = state.masked(backend);
    let tokens: Vec<TokenId> = dist
        .ranked()
        .into_iter()
        .filter(|id| !masked.contains(id))
        .take(config.pc_top_k)
        .collect();

    let mut texts = Vec::with_capacity(tokens.len());
    let mut ids = state.generated().to_vec();
    for &k in &tokens {
        if k != eos {
            ids.push(k);
        }
        texts.push(backend.detokenize(&ids)?);
        if k != eos {
            ids.pop();
        }
    }
    let embeddings = backend.encode_texts(&texts)?;

    let mut scored: Vec<ScoredCandidate> = tokens
        .into_par_iter()
        .zip(texts)
        .zip(embeddings)
        .map(|((token, text), embedding)| {
            let log_prob = dist.log_probs()[token as usize];
            let variance = variance_term(embedding.as_slice(), s0.as_slice(), images);
            let orthogonality = orthogonality_term(embedding.as_slice(), previous);
            let score = log_prob + config.lambda_v * variance - config.lambda_o * orthogonality;
            ScoredCandidate {
                token,
                text,
                log_prob,
                variance,
                orthogonality,
                score,
                potential: 0.0,
                embedding,
            }
        })
        .collect();

    let max = scored.iter().map(|c| c.score).fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = scored.iter().map(|c| (c.score - max).exp()).sum();
    for c in &mut scored {
        c.potential = (c.score - max).exp() / z;
    }
    Ok(scored)
}

/// Index of the highest score, lower token id first on ties.
pub fn argmax_by_score<T>(items: &[T], score: impl Fn(&T) -> f64, token: impl Fn(&T) -> TokenId) -> usize {
    let mut best = 0;
    for i in 1..items.len() {
        let (a, b) = (score(&items[i]), score(&items[best]));
        if a > b || (a == b && token(&items[i]) < token(&items[best])) {
            best = i;
        }
    }
    best
}

/// Picks an index according to the sampling mode. `weights` need not be
/// normalized.
fn select<T>(
    items: &[T],
    weight: impl Fn(&T) -> f64,
    token: impl Fn(&T) -> TokenId,
    sampling: Sampling,
    rng: &mut ChaCha8Rng,
) -> usize {
    match sampling {
        Sampling::Greedy => argmax_by_score(items, &weight, &token),
        Sampling::TopKSample { k } => {
            let mut order: Vec<usize> = (0..items.len()).collect();
            order.sort_by(|&a, &b| {
                weight(&items[b])
                    .total_cmp(&weight(&items[a]))
                    .then(token(&items[a]).cmp(&token(&items[b])))
            });
            order.truncate(k.max(1));
            let ws: Vec<f64> = order.iter().map(|&i| weight(&items[i]).max(0.0)).collect();
            match WeightedIndex::new(&ws) {
                Ok(dist) => order[dist.sample(rng)],
                Err(_) => order[0],
            }
        }
    }
}

/// Record of one principal-phrase decode step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GuidedStep {
    pub prefix_ids: Vec<TokenId>,
    pub chosen: TokenId,
    pub candidates: usize,
}

/// Record of one average-phrase decode step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AverageStep {
    pub prefix_ids: Vec<TokenId>,
    pub chosen: TokenId,
    pub rules: Vec<RuleEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragePhrase {
    pub text: String,
    pub embedding: Embedding,
    pub tokens: Vec<TokenId>,
    pub condition: Embedding,
    pub trace: Vec<AverageStep>,
}

/// Decodes the average phrase: each step truncates to `avg_top_k`, applies
/// the hypernym aggregation, then selects.
pub fn generate_average_phrase(
    images: &EmbeddingMatrix,
    backend: &dyn Backend,
    graph: &LexicalGraph,
    config: &GuidanceConfig,
) -> Result<AveragePhrase> {
    config.validate()?;
    let condition = mean_embedding(images)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let lexicon = BackendLexicon(backend);
    let eos = backend.meta().eos_id;
    let mut state = DecodeState::start(backend, &config.prompt)?;
    let mut trace = Vec::new();

    while state.step() < config.max_avg_tokens {
        let dist = backend.next_token(&state.prefix_ids, &condition)?;
        let cands = truncate_top_k_masked(&dist, config.avg_top_k, &state.masked(backend), &lexicon);
        let agg = aggregate(&cands, graph, &lexicon);
        let entries = &agg.candidates.entries;
        let chosen = entries[select(entries, |c| c.prob, |c| c.token, config.sampling, &mut rng)].token;
        trace.push(AverageStep {
            prefix_ids: state.prefix_ids.clone(),
            chosen,
            rules: agg.trace,
        });
        if chosen == eos {
            break;
        }
        state.prefix_ids.push(chosen);
    }

    let tokens = state.generated().to_vec();
    let text = backend.detokenize(&tokens)?;
    let embedding = backend.encode_text(&text)?;
    Ok(AveragePhrase {
        text,
        embedding,
        tokens,
        condition,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalPhrase {
    pub text: String,
    pub embedding: Embedding,
    pub tokens: Vec<TokenId>,
    pub trace: Vec<GuidedStep>,
}

/// Decodes one principal phrase given the phrases before it.
pub fn generate_principal_phrase(
    images: &EmbeddingMatrix,
    backend: &dyn Backend,
    condition: &Embedding,
    average: &Embedding,
    previous: &[Embedding],
    config: &GuidanceConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PrincipalPhrase> {
    let eos = backend.meta().eos_id;
    let mut state = DecodeState::start(backend, &config.prompt)?;
    let mut trace = Vec::new();
    let mut last: Option<ScoredCandidate> = None;

    while state.step() < config.max_pc_tokens {
        let dist = backend.next_token(&state.prefix_ids, condition)?;
        let scored = modified_potentials(&state, &dist, images, average, previous, config, backend)?;
        let pick = select(&scored, |c| c.score, |c| c.token, config.sampling, rng);
        let candidates = scored.len();
        let cand = scored.into_iter().nth(pick).expect("candidate set is never empty");
        trace.push(GuidedStep {
            prefix_ids: state.prefix_ids.clone(),
            chosen: cand.token,
            candidates,
        });
        let done = cand.token == eos;
        if !done {
            state.prefix_ids.push(cand.token);
        }
        last = Some(cand);
        if done {
            break;
        }
    }

    // the chosen candidate's text is the finished phrase, so its embedding is
    // already encode_text(text)
    let last = last.expect("at least one decode step");
    Ok(PrincipalPhrase {
        text: last.text,
        embedding: last.embedding,
        tokens: state.generated().to_vec(),
        trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhraseEntry {
    pub text: String,
    pub embedding: Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrincipalEntry {
    pub text: String,
    pub embedding: Embedding,
    /// `E_T(s) . E_I(x)` for every image, in image order.
    pub scores: Vec<f64>,
}

/// Average phrase plus ordered principal phrases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhraseSet {
    pub average: PhraseEntry,
    pub principals: Vec<PrincipalEntry>,
    pub config: GuidanceConfig,
    pub backend: String,
}

impl PhraseSet {
    pub fn principal_embeddings(&self) -> Vec<Embedding> {
        self.principals.iter().map(|p| p.embedding.clone()).collect()
    }

    pub fn labels(&self) -> Vec<String> {
        self.principals.iter().map(|p| p.text.clone()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and checks that every embedding is unit norm.
    pub fn from_json(text: &str) -> Result<Self> {
        let set: PhraseSet = serde_json::from_str(text)?;
        let all = std::iter::once(&set.average.embedding).chain(set.principals.iter().map(|p| &p.embedding));
        for e in all {
            Embedding::from_unit(e.as_slice().to_vec())?;
        }
        Ok(set)
    }
}

/// Full output of [`generate_principal_phrases`], with decode traces.
#[derive(Debug, Clone)]
pub struct Generation {
    pub phrases: PhraseSet,
    pub average: AveragePhrase,
    pub principals: Vec<PrincipalPhrase>,
}

/// Generates the average phrase, then `num_phrases` principal phrases.
pub fn generate_principal_phrases(
    images: &EmbeddingMatrix,
    backend: &dyn Backend,
    graph: &LexicalGraph,
    config: &GuidanceConfig,
) -> Result<Generation> {
    let average = generate_average_phrase(images, backend, graph, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0f_9c1a);
    let mut principals: Vec<PrincipalPhrase> = Vec::with_capacity(config.num_phrases);
    let mut previous: Vec<Embedding> = Vec::with_capacity(config.num_phrases);
    for _ in 0..config.num_phrases {
        let phrase = generate_principal_phrase(
            images,
            backend,
            &average.condition,
            &average.embedding,
            &previous,
            config,
            &mut rng,
        )?;
        previous.push(phrase.embedding.clone());
        principals.push(phrase);
    }

    let phrases = PhraseSet {
        average: PhraseEntry {
            text: average.text.clone(),
            embedding: average.embedding.clone(),
        },
        principals: principals
            .iter()
            .map(|p| PrincipalEntry {
                text: p.text.clone(),
                embedding: p.embedding.clone(),
                scores: images.project(p.embedding.as_slice()),
            })
            .collect(),
        config: config.clone(),
        backend: backend.fingerprint(),
    };
    Ok(Generation {
        phrases,
        average,
        principals,
    })
}

/// Unguided conditioned greedy decode: argmax of the raw distribution at
/// every step, with the same BOS/EOS masking as the guided decoders.
pub fn greedy_caption(
    backend: &dyn Backend,
    condition: &Embedding,
    prompt: &str,
    max_tokens: usize,
) -> Result<(String, Vec<TokenId>)> {
    let eos = backend.meta().eos_id;
    let mut state = DecodeState::start(backend, prompt)?;
    while state.step() < max_tokens {
        let dist = backend.next_token(&state.prefix_ids, condition)?;
        let masked = state.masked(backend);
        let next = dist
            .ranked()
            .into_iter()
            .find(|id| !masked.contains(id))
            .expect("vocabulary larger than the mask");
        if next == eos {
            break;
        }
        state.prefix_ids.push(next);
    }
    let tokens = state.generated().to_vec();
    Ok((backend.detokenize(&tokens)?, tokens))
}
