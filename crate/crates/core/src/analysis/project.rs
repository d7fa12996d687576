use serde::{Deserialize, Serialize};

use crate::backend::EmbeddingMatrix;
use crate::decoder::PhraseSet;
use crate::error::{Error, Result};

/// Projection of every image onto every principal phrase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionTable {
    pub image_ids: Vec<String>,
    pub labels: Vec<String>,
    /// `raw[i][j] = E_T(s_j) . E_I(x_i)`.
    pub raw: Vec<Vec<f64>>,
    /// Per-phrase mean of `raw` over images.
    pub means: Vec<f64>,
    pub centered: bool,
}

impl ProjectionTable {
    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn width(&self) -> usize {
        self.labels.len()
    }

    pub fn centered_row(&self, i: usize) -> Vec<f64> {
        self.raw[i].iter().zip(&self.means).map(|(v, m)| v - m).collect()
    }

    /// Rows as reported: centered when the table is centered.
    pub fn values(&self) -> Vec<Vec<f64>> {
        if self.centered {
            (0..self.len()).map(|i| self.centered_row(i)).collect()
        } else {
            self.raw.clone()
        }
    }

    pub fn row_of(&self, image_id: &str) -> Option<usize> {
        self.image_ids.iter().position(|id| id == image_id)
    }
}

pub fn project(phrases: &PhraseSet, image_ids: &[String], images: &EmbeddingMatrix, center: bool) -> Result<ProjectionTable> {
    if image_ids.len() != images.len() {
        return Err(Error::IdCountMismatch {
            ids: image_ids.len(),
            count: images.len(),
        });
    }
    for p in &phrases.principals {
        if p.embedding.dim() != images.dim() {
            return Err(Error::DimensionMismatch {
                expected: images.dim(),
                got: p.embedding.dim(),
            });
        }
    }
    let raw: Vec<Vec<f64>> = images
        .rows()
        .map(|x| phrases.principals.iter().map(|p| p.embedding.dot(x)).collect())
        .collect();
    let n = raw.len().max(1) as f64;
    let means = (0..phrases.principals.len())
        .map(|j| raw.iter().map(|r| r[j]).sum::<f64>() / n)
        .collect();
    Ok(ProjectionTable {
        image_ids: image_ids.to_vec(),
        labels: phrases.labels(),
        raw,
        means,
        centered: center,
    })
}
