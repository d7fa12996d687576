//! Seeded toy fixtures shared by tests, the acceptance suite and the
//! `toy-fixture` command.
//!
//! The standard fixture is a small vehicle-photo world: every image mixes a
//! body type, a color, a viewpoint and a scene word, plus Gaussian noise.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::backend::{Embedding, EmbeddingMatrix, ToyBackend, ToyBackendSpec, TokenId, BOS_TOKEN, EOS_TOKEN};
use crate::error::Result;
use crate::lexgraph::{LexicalGraph, TokenLexicon};

pub const TYPES: [&str; 5] = ["car", "suv", "truck", "sedan", "van"];
pub const COLORS: [&str; 4] = ["red", "blue", "white", "black"];
pub const VIEWS: [&str; 3] = ["front", "side", "rear"];
pub const SCENES: [&str; 3] = ["road", "city", "night"];

const FILLER: [&str; 14] = [
    "image", "of", "a", "vehicle", "parked", "with", "and", "seat", "sofa", "chair", "bench", "dish", "salad", "pasta",
];

pub const STANDARD_SEED: u64 = 7;
pub const STANDARD_DIM: usize = 24;
pub const STANDARD_IMAGES: usize = 60;

/// Edges of the standard lexical graph, `(child, parent)`.
pub const STANDARD_EDGES: [(&str, &str); 11] = [
    ("suv", "car"),
    ("sedan", "car"),
    ("car", "vehicle"),
    ("truck", "vehicle"),
    ("van", "vehicle"),
    ("sofa", "seat"),
    ("chair", "seat"),
    ("bench", "seat"),
    ("salad", "dish"),
    ("pasta", "dish"),
    ("soup", "dish"),
];

fn standard_vocab() -> Vec<String> {
    let mut v = vec![BOS_TOKEN.to_string(), EOS_TOKEN.to_string()];
    for w in FILLER.iter().chain(&TYPES).chain(&COLORS).chain(&VIEWS).chain(&SCENES) {
        v.push(w.to_string());
    }
    v.push("soup".into());
    v
}

/// Backend spec of the standard fixture. The prompt `image of a` is strongly
/// preferred after BOS; content words lean mildly towards `car` and, once
/// emitted, towards stopping rather than repeating.
pub fn standard_spec() -> ToyBackendSpec {
    let vocab = standard_vocab();
    let mut spec = ToyBackendSpec::uniform(vocab.clone(), STANDARD_SEED, STANDARD_DIM);
    spec.condition_scale = 4.0;
    spec.set_bias(BOS_TOKEN, "image", 8.0);
    spec.set_bias("image", "of", 8.0);
    spec.set_bias("of", "a", 8.0);
    spec.set_bias("a", "car", 1.0);
    spec.set_bias("a", "parked", 0.5);
    for w in vocab.iter().skip(2) {
        spec.set_bias(w, w, -4.0);
    }
    for w in TYPES.iter().chain(&COLORS).chain(&VIEWS).chain(&SCENES).chain(&["vehicle"]) {
        spec.set_bias(w, EOS_TOKEN, 2.5);
    }
    // hyponyms reappear after a hypernym and are merged back into it
    spec.set_bias("vehicle", EOS_TOKEN, 6.0);
    for c in COLORS {
        for t in TYPES {
            spec.set_bias(c, t, 0.8);
        }
    }
    spec
}

pub fn standard_backend() -> ToyBackend {
    ToyBackend::new(standard_spec()).expect("standard spec is valid")
}

pub fn standard_graph() -> LexicalGraph {
    LexicalGraph::from_edges(&STANDARD_EDGES).expect("standard graph is acyclic")
}

/// LEXG text of the standard graph.
pub fn standard_lexg() -> String {
    let mut s = String::from("# child\tparent\n");
    for (c, p) in STANDARD_EDGES {
        s.push_str(&format!("{c}\t{p}\n"));
    }
    s
}

/// An image set with its ground-truth attribute words.
#[derive(Debug, Clone)]
pub struct ImageSet {
    pub ids: Vec<String>,
    pub images: EmbeddingMatrix,
    /// `(type, color, view, scene)` per image.
    pub attributes: Vec<[&'static str; 4]>,
}

impl ImageSet {
    /// One boolean column per listed word: whether the image carries it.
    pub fn labels(&self, words: &[&str]) -> Vec<Vec<bool>> {
        self.attributes
            .iter()
            .map(|a| words.iter().map(|w| a.contains(w)).collect())
            .collect()
    }
}

/// `n` synthetic vehicle images over `backend`'s word vectors.
pub fn vehicle_images(backend: &ToyBackend, n: usize, seed: u64, noise: f64) -> Result<ImageSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise).expect("noise is finite");
    let dim = backend.spec().embed_dim;
    let mut rows = Vec::with_capacity(n);
    let mut attributes = Vec::with_capacity(n);
    for _ in 0..n {
        let a = [
            *TYPES.choose(&mut rng).unwrap(),
            *COLORS.choose(&mut rng).unwrap(),
            *VIEWS.choose(&mut rng).unwrap(),
            *SCENES.choose(&mut rng).unwrap(),
        ];
        let mut x: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
        for (w, weight) in a.iter().zip([1.0, 0.8, 0.6, 0.4]) {
            let v = backend.word_vector(backend.token_id(w).expect("fixture word"));
            x.iter_mut().zip(v).for_each(|(x, v)| *x += weight * v);
        }
        rows.push(x);
        attributes.push(a);
    }
    Ok(ImageSet {
        ids: (0..n).map(|i| format!("img{i:03}")).collect(),
        images: EmbeddingMatrix::from_rows(dim, rows)?,
        attributes,
    })
}

pub fn standard_images(backend: &ToyBackend) -> ImageSet {
    vehicle_images(backend, STANDARD_IMAGES, STANDARD_SEED, 0.3).expect("standard images")
}

/// Random backend with a dense Gaussian bigram table and a random image set,
/// for properties that must hold on arbitrary fixtures.
pub fn seeded_fixture(seed: u64) -> (ToyBackend, EmbeddingMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = 12 + (seed % 9) as usize;
    let dim = 6 + (seed % 5) as usize;
    let mut vocab = vec![BOS_TOKEN.to_string(), EOS_TOKEN.to_string(), "image".into(), "of".into(), "a".into()];
    vocab.extend((0..words).map(|i| format!("w{i}")));
    let mut spec = ToyBackendSpec::uniform(vocab, seed, dim);
    for row in spec.bigram_bias.iter_mut() {
        for v in row.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
    }
    spec.condition_scale = rng.random_range(1.0..4.0);
    let backend = ToyBackend::new(spec).expect("seeded spec is valid");
    let n = rng.random_range(5..30);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            // a shared offset keeps the mean away from zero
            (0..dim)
                .map(|j| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z + if j == 0 { 1.5 } else { 0.0 }
                })
                .collect::<Vec<f64>>()
        })
        .collect();
    let images = EmbeddingMatrix::from_rows(dim, rows).expect("seeded rows are non-zero");
    (backend, images)
}

/// Random unit vectors.
pub fn random_unit_vectors(n: usize, dim: usize, seed: u64) -> Vec<Embedding> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            Embedding::normalized(v).expect("gaussian vector is non-zero")
        })
        .collect()
}

/// Lexicon over a plain word list: token id = position, every word is a
/// single token.
#[derive(Debug, Clone)]
pub struct WordList(pub Vec<String>);

impl WordList {
    pub fn new(words: &[&str]) -> Self {
        WordList(words.iter().map(|w| w.to_string()).collect())
    }

    pub fn id(&self, word: &str) -> TokenId {
        self.0.iter().position(|w| w == word).expect("word in list") as TokenId
    }
}

impl TokenLexicon for WordList {
    fn word(&self, id: TokenId) -> Option<String> {
        self.0.get(id as usize).cloned()
    }

    fn single_token(&self, word: &str) -> Option<TokenId> {
        self.0.iter().position(|w| w == word).map(|i| i as TokenId)
    }
}
