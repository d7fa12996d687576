//! Comparison baselines and set preparation: PCA, spherical k-means,
//! most-frequent caption words, agglomerative clustering and subsampling.

mod cluster;
mod freq;
mod kmeans;
mod pca;
mod sample;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use cluster::{agglomerative_cluster, ClusterTree, Merge};
pub use freq::{most_frequent_words, stopwords, WordCount};
pub use kmeans::{spherical_kmeans, SphericalKMeans, MAX_ITERATIONS};
pub use pca::pca_directions;
pub use sample::subsample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionMethod {
    Pca,
    Kmeans,
}

/// Unit-norm directions extracted from an embedding set. `stats` holds the
/// singular value (PCA) or cluster size (k-means) of each direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionSet {
    pub method: DirectionMethod,
    pub directions: Vec<Vec<f64>>,
    pub stats: Vec<f64>,
    /// Set when PCA found fewer independent directions than requested.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub rank_deficient: bool,
}

impl DirectionSet {
    pub fn empty(method: DirectionMethod) -> Self {
        DirectionSet {
            method,
            directions: Vec::new(),
            stats: Vec::new(),
            rank_deficient: false,
        }
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
