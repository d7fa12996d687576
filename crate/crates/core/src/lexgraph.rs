//! Hypernym graph and the probability aggregation used for the average
//! phrase.
//!
//! During average-phrase decoding the next-token distribution is cut to its
//! most probable tokens, then each candidate `t` is visited once in
//! descending order of its initial probability and one rule fires:
//!
//! 1. If other candidates are direct hypernyms of `t`, the most probable of
//!    them absorbs `t`'s mass.
//! 2. Otherwise, if other candidates are direct hyponyms of `t`, `t` absorbs
//!    all of them.
//! 3. Otherwise, if another candidate `r` shares a direct hypernym `q` with
//!    `t`, the most probable such `r` and `t` are merged into `q`, which is
//!    added to the candidate set.
//!
//! Every rule moves mass; none creates or destroys it.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::backend::{Backend, TokenDistribution, TokenId};
use crate::error::{Error, Result};

/// Number of tokens kept before aggregation.
pub const DEFAULT_TOP_K: usize = 12;

/// Directed "is-a" graph over lowercase lemmas. Immutable after construction.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LexicalGraph {
    lemmas: BTreeSet<String>,
    hypernyms: BTreeMap<String, BTreeSet<String>>,
    hyponyms: BTreeMap<String, BTreeSet<String>>,
}

impl LexicalGraph {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a graph from a lemma set and `(child, parent)` edges.
    pub fn from_parts<I, E, S>(lemmas: I, edges: E) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        E: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let lemmas: BTreeSet<String> = lemmas.into_iter().map(Into::into).collect();
        let mut graph = LexicalGraph {
            lemmas,
            ..Default::default()
        };
        for (child, parent) in edges {
            let (child, parent) = (child.into(), parent.into());
            for l in [&child, &parent] {
                if !graph.lemmas.contains(l) {
                    return Err(Error::UnknownLemma(l.clone()));
                }
            }
            if child == parent {
                return Err(Error::Cycle(child));
            }
            graph.hypernyms.entry(child.clone()).or_default().insert(parent.clone());
            graph.hyponyms.entry(parent).or_default().insert(child);
        }
        graph.check_acyclic()?;
        Ok(graph)
    }

    /// Builds a graph whose lemma set is exactly the edge endpoints.
    pub fn from_edges<S: AsRef<str>>(edges: &[(S, S)]) -> Result<Self> {
        let lemmas: BTreeSet<String> = edges
            .iter()
            .flat_map(|(c, p)| [c.as_ref().to_string(), p.as_ref().to_string()])
            .collect();
        Self::from_parts(
            lemmas,
            edges
                .iter()
                .map(|(c, p)| (c.as_ref().to_string(), p.as_ref().to_string())),
        )
    }

    /// Parses LEXG text: one `child<TAB>parent` edge per line, `#` comments
    /// and blank lines ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |reason: &str| Error::MalformedLine {
                line: n + 1,
                reason: reason.to_string(),
            };
            let mut parts = line.split('\t');
            let (Some(child), Some(parent), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(malformed("expected `child<TAB>parent`"));
            };
            let (child, parent) = (child.trim(), parent.trim());
            if child.is_empty() || parent.is_empty() {
                return Err(malformed("empty lemma"));
            }
            if child.chars().any(char::is_uppercase) || parent.chars().any(char::is_uppercase) {
                return Err(malformed("lemmas must be lowercase"));
            }
            edges.push((child.to_string(), parent.to_string()));
        }
        Self::from_edges(&edges)
    }

    pub fn lemma_count(&self) -> usize {
        self.lemmas.len()
    }

    pub fn edge_count(&self) -> usize {
        self.hypernyms.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.lemmas.is_empty()
    }

    pub fn contains(&self, lemma: &str) -> bool {
        self.lemmas.contains(lemma)
    }

    pub fn direct_hypernyms(&self, lemma: &str) -> impl Iterator<Item = &str> + '_ {
        self.hypernyms.get(lemma).into_iter().flatten().map(String::as_str)
    }

    pub fn direct_hyponyms(&self, lemma: &str) -> impl Iterator<Item = &str> + '_ {
        self.hyponyms.get(lemma).into_iter().flatten().map(String::as_str)
    }

    pub fn is_direct_hypernym(&self, lemma: &str, parent: &str) -> bool {
        self.hypernyms.get(lemma).is_some_and(|s| s.contains(parent))
    }

    /// Direct hypernyms shared by `a` and `b`, in lexicographic order.
    pub fn shared_hypernyms<'a>(&'a self, a: &str, b: &str) -> Vec<&'a str> {
        match (self.hypernyms.get(a), self.hypernyms.get(b)) {
            (Some(x), Some(y)) => x.intersection(y).map(String::as_str).collect(),
            _ => Vec::new(),
        }
    }

    /// True if `ancestor` is reachable from `lemma` along hypernym edges.
    pub fn is_ancestor(&self, lemma: &str, ancestor: &str) -> bool {
        let mut stack: Vec<&str> = self.direct_hypernyms(lemma).collect();
        let mut seen = HashSet::new();
        while let Some(l) = stack.pop() {
            if l == ancestor {
                return true;
            }
            if seen.insert(l) {
                stack.extend(self.direct_hypernyms(l));
            }
        }
        false
    }

    fn check_acyclic(&self) -> Result<()> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Open,
            Done,
        }
        let mut marks: BTreeMap<&str, Mark> = BTreeMap::new();
        for start in self.hypernyms.keys() {
            if marks.contains_key(start.as_str()) {
                continue;
            }
            // iterative DFS; each frame holds a node and its remaining parents
            let mut stack: Vec<(&str, Vec<&str>)> = vec![(start, self.direct_hypernyms(start).collect())];
            marks.insert(start, Mark::Open);
            while let Some((node, parents)) = stack.last_mut() {
                match parents.pop() {
                    Some(p) => match marks.get(p) {
                        Some(Mark::Open) => return Err(Error::Cycle(p.to_string())),
                        Some(Mark::Done) => {}
                        None => {
                            marks.insert(p, Mark::Open);
                            let next = self.direct_hypernyms(p).collect();
                            stack.push((p, next));
                        }
                    },
                    None => {
                        marks.insert(node, Mark::Done);
                        stack.pop();
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<LexicalGraph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    LexicalGraph::parse(&text)
}

/// Maps between backend tokens and graph lemmas.
pub trait TokenLexicon {
    /// Lowercase lemma for a token, if it has one.
    fn word(&self, id: TokenId) -> Option<String>;
    /// The token for `word`, if it is exactly one token.
    fn single_token(&self, word: &str) -> Option<TokenId>;
}

/// [`TokenLexicon`] backed by a backend tokenizer.
pub struct BackendLexicon<'a>(pub &'a dyn Backend);

impl TokenLexicon for BackendLexicon<'_> {
    fn word(&self, id: TokenId) -> Option<String> {
        let w = self.0.detokenize(&[id]).ok()?;
        let w = w.trim().to_lowercase();
        (!w.is_empty()).then_some(w)
    }

    fn single_token(&self, word: &str) -> Option<TokenId> {
        match self.0.tokenize(word).ok()?.as_slice() {
            [id] => Some(*id),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub token: TokenId,
    pub word: String,
    pub prob: f64,
}

/// Truncated candidate tokens, sorted by descending probability (lower token
/// id first on ties).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateSet {
    pub entries: Vec<Candidate>,
    pub capacity: usize,
}

impl CandidateSet {
    pub fn new(mut entries: Vec<Candidate>, capacity: usize) -> Self {
        sort_candidates(&mut entries);
        CandidateSet { entries, capacity }
    }

    pub fn mass(&self) -> f64 {
        self.entries.iter().map(|c| c.prob).sum()
    }

    pub fn prob_of(&self, word: &str) -> f64 {
        self.entries.iter().filter(|c| c.word == word).map(|c| c.prob).sum()
    }

    pub fn best(&self) -> Option<&Candidate> {
        self.entries.first()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn sort_candidates(entries: &mut [Candidate]) {
    entries.sort_by(|a, b| b.prob.total_cmp(&a.prob).then(a.token.cmp(&b.token)));
}

/// Keeps the `k` most probable tokens with nonzero probability and
/// renormalizes them to sum to one.
pub fn truncate_top_k(dist: &TokenDistribution, k: usize, lexicon: &dyn TokenLexicon) -> CandidateSet {
    truncate_top_k_masked(dist, k, &[], lexicon)
}

/// Like [`truncate_top_k`], never keeping any token in `masked`.
pub fn truncate_top_k_masked(
    dist: &TokenDistribution,
    k: usize,
    masked: &[TokenId],
    lexicon: &dyn TokenLexicon,
) -> CandidateSet {
    let k = k.max(1);
    let kept: Vec<(TokenId, f64)> = dist
        .ranked()
        .into_iter()
        .filter(|id| !masked.contains(id))
        .map(|id| (id, dist.prob(id)))
        .filter(|&(_, p)| p > 0.0)
        .take(k)
        .collect();
    let total: f64 = kept.iter().map(|&(_, p)| p).sum();
    let entries = kept
        .into_iter()
        .map(|(token, p)| Candidate {
            token,
            word: lexicon.word(token).unwrap_or_default(),
            prob: p / total,
        })
        .collect();
    CandidateSet::new(entries, k)
}

/// What one visit did to the candidate set.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum RuleEvent {
    /// Rule 1: `from` moved its mass into its direct hypernym `into`.
    Hypernym { from: String, into: String, mass: f64 },
    /// Rule 2: `into` absorbed its direct hyponyms.
    Hyponyms {
        into: String,
        absorbed: Vec<(String, f64)>,
    },
    /// Rule 3: `t` and `r` were merged into their shared hypernym `q`.
    SharedHypernym {
        t: String,
        r: String,
        q: String,
        mass: f64,
    },
}

impl RuleEvent {
    /// Word whose probability increased.
    pub fn gainer(&self) -> &str {
        match self {
            RuleEvent::Hypernym { into, .. } | RuleEvent::Hyponyms { into, .. } => into,
            RuleEvent::SharedHypernym { q, .. } => q,
        }
    }

    /// Words whose probability dropped to zero.
    pub fn losers(&self) -> Vec<&str> {
        match self {
            RuleEvent::Hypernym { from, .. } => vec![from],
            RuleEvent::Hyponyms { absorbed, .. } => absorbed.iter().map(|(w, _)| w.as_str()).collect(),
            RuleEvent::SharedHypernym { t, r, .. } => vec![t, r],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregation {
    pub candidates: CandidateSet,
    pub trace: Vec<RuleEvent>,
}

fn better(entries: &[Candidate], a: usize, b: usize) -> bool {
    let (x, y) = (&entries[a], &entries[b]);
    x.prob > y.prob || (x.prob == y.prob && x.token < y.token)
}

fn argmax_where(entries: &[Candidate], mut pred: impl FnMut(usize, &Candidate) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (j, c) in entries.iter().enumerate() {
        if pred(j, c) && best.is_none_or(|b| better(entries, j, b)) {
            best = Some(j);
        }
    }
    best
}

/// Applies the first applicable rule to the entry at `index`. Zero-mass
/// entries and words outside the graph are left alone.
pub fn apply_rules(
    entries: &mut Vec<Candidate>,
    index: usize,
    graph: &LexicalGraph,
    lexicon: &dyn TokenLexicon,
) -> Option<RuleEvent> {
    let t = entries[index].clone();
    if t.prob <= 0.0 || !graph.contains(&t.word) {
        return None;
    }
    let live = |j: usize, c: &Candidate| j != index && c.prob > 0.0 && c.word != t.word;

    if let Some(r) = argmax_where(entries, |j, c| live(j, c) && graph.is_direct_hypernym(&t.word, &c.word)) {
        entries[r].prob += t.prob;
        entries[index].prob = 0.0;
        return Some(RuleEvent::Hypernym {
            from: t.word,
            into: entries[r].word.clone(),
            mass: t.prob,
        });
    }

    let hyponyms: Vec<usize> = entries
        .iter()
        .enumerate()
        .filter(|&(j, c)| live(j, c) && graph.is_direct_hypernym(&c.word, &t.word))
        .map(|(j, _)| j)
        .collect();
    if !hyponyms.is_empty() {
        let mut absorbed = Vec::with_capacity(hyponyms.len());
        for j in hyponyms {
            entries[index].prob += entries[j].prob;
            absorbed.push((entries[j].word.clone(), entries[j].prob));
            entries[j].prob = 0.0;
        }
        return Some(RuleEvent::Hyponyms { into: t.word, absorbed });
    }

    let r = argmax_where(entries, |j, c| {
        live(j, c) && !graph.shared_hypernyms(&t.word, &c.word).is_empty()
    })?;
    let r_entry = entries[r].clone();
    let (q, q_token) = graph
        .shared_hypernyms(&t.word, &r_entry.word)
        .into_iter()
        .find_map(|q| lexicon.single_token(q).map(|id| (q.to_string(), id)))?;
    let mass = t.prob + r_entry.prob;
    match entries.iter_mut().find(|c| c.token == q_token) {
        Some(existing) => existing.prob += mass,
        None => entries.push(Candidate {
            token: q_token,
            word: q.clone(),
            prob: mass,
        }),
    }
    entries[index].prob = 0.0;
    entries[r].prob = 0.0;
    Some(RuleEvent::SharedHypernym {
        t: t.word,
        r: r_entry.word,
        q,
        mass,
    })
}

/// Runs one ordered pass of [`apply_rules`] over the candidates that were
/// present on entry, then drops zero-mass entries.
pub fn aggregate(cands: &CandidateSet, graph: &LexicalGraph, lexicon: &dyn TokenLexicon) -> Aggregation {
    let mut entries = cands.entries.clone();
    sort_candidates(&mut entries);
    let visits = entries.len();
    let mut trace = Vec::new();
    for index in 0..visits {
        if let Some(ev) = apply_rules(&mut entries, index, graph, lexicon) {
            trace.push(ev);
        }
    }
    entries.retain(|c| c.prob > 0.0);
    Aggregation {
        candidates: CandidateSet::new(entries, cands.capacity),
        trace,
    }
}
