//! Summaries of image sets as an average phrase plus ordered principal
//! phrases, decoded from a vision-language backend under variance and
//! orthogonality guidance.

pub mod analysis;
pub mod backend;
pub mod baselines;
pub mod decoder;
mod error;
pub mod fixtures;
pub mod lexgraph;

pub use backend::{open_backend, Backend, BackendMeta, Embedding, EmbeddingMatrix, TokenDistribution, TokenId};
pub use decoder::{generate_average_phrase, generate_principal_phrases, GuidanceConfig, PhraseSet, Sampling};
pub use error::{Error, ErrorKind, Result};
pub use lexgraph::{load_graph, LexicalGraph};
