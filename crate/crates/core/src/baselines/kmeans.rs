use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::{DirectionMethod, DirectionSet};
use crate::backend::{dot, Embedding, EmbeddingMatrix};
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct SphericalKMeans {
    /// Unit-norm centroids; `stats` are cluster sizes.
    pub centroids: DirectionSet,
    pub assignment: Vec<usize>,
    /// `sum(1 - cos(x, centroid))` after each assignment step.
    pub objective: Vec<f64>,
    pub converged: bool,
}

/// Cosine k-means on unit vectors with k-means++ seeding.
///
/// Empty clusters are reseeded with the point farthest from its centroid.
pub fn spherical_kmeans(images: &EmbeddingMatrix, k: usize, seed: u64) -> Result<SphericalKMeans> {
    let n = images.len();
    if k > n {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds the {n} images")));
    }
    if k == 0 {
        return Ok(SphericalKMeans {
            centroids: DirectionSet::empty(DirectionMethod::Kmeans),
            assignment: vec![],
            objective: vec![],
            converged: true,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = init_plus_plus(images, k, &mut rng);
    let mut assignment: Vec<usize> = vec![usize::MAX; n];
    let mut objective = Vec::new();
    let mut converged = false;

    for _ in 0..MAX_ITERATIONS {
        let (mut next, mut cos) = assign(images, &centroids);
        reseed_empty(images, &mut centroids, &mut next, &mut cos);
        objective.push(cos.iter().map(|c| 1.0 - c).sum());
        if next == assignment {
            converged = true;
            break;
        }
        assignment = next;

        let mut sums = vec![vec![0.0; images.dim()]; k];
        for (row, &c) in images.rows().zip(&assignment) {
            sums[c].iter_mut().zip(row).for_each(|(s, v)| *s += v);
        }
        for (c, sum) in sums.into_iter().enumerate() {
            // a cluster whose members cancel out keeps its previous centroid
            if let Ok(e) = Embedding::normalized(sum) {
                centroids[c] = e.into_inner();
            }
        }
    }

    let mut sizes = vec![0.0; k];
    for &c in &assignment {
        sizes[c] += 1.0;
    }
    Ok(SphericalKMeans {
        centroids: DirectionSet {
            method: DirectionMethod::Kmeans,
            directions: centroids,
            stats: sizes,
            rank_deficient: false,
        },
        assignment,
        objective,
        converged,
    })
}

fn init_plus_plus(images: &EmbeddingMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = images.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut dist: Vec<f64> = images.rows().map(|r| (1.0 - dot(r, images.row(chosen[0]))).max(0.0)).collect();
    while chosen.len() < k {
        let pick = match WeightedIndex::new(&dist) {
            Ok(w) => w.sample(rng),
            // all remaining mass is zero: duplicates only
            Err(_) => (0..n).find(|i| !chosen.contains(i)).unwrap(),
        };
        chosen.push(pick);
        for (d, r) in dist.iter_mut().zip(images.rows()) {
            *d = d.min((1.0 - dot(r, images.row(pick))).max(0.0));
        }
    }
    chosen.into_iter().map(|i| images.row(i).to_vec()).collect()
}

fn assign(images: &EmbeddingMatrix, centroids: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>) {
    images
        .rows()
        .map(|r| {
            let mut best = (0, f64::NEG_INFINITY);
            for (c, centroid) in centroids.iter().enumerate() {
                let s = dot(r, centroid);
                if s > best.1 {
                    best = (c, s);
                }
            }
            best
        })
        .unzip()
}

fn reseed_empty(images: &EmbeddingMatrix, centroids: &mut [Vec<f64>], assignment: &mut [usize], cos: &mut [f64]) {
    let k = centroids.len();
    loop {
        let mut sizes = vec![0usize; k];
        assignment.iter().for_each(|&c| sizes[c] += 1);
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let far = (0..assignment.len())
            .filter(|&i| sizes[assignment[i]] > 1)
            .min_by(|&a, &b| cos[a].total_cmp(&cos[b]).then(a.cmp(&b)));
        let Some(far) = far else {
            return;
        };
        centroids[empty] = images.row(far).to_vec();
        assignment[far] = empty;
        cos[far] = 1.0;
    }
}
