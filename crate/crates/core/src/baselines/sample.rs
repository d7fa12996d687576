use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::backend::EmbeddingMatrix;
use crate::error::{Error, Result};

/// Uniform sample of `count` images without replacement, kept in their
/// original order.
pub fn subsample(ids: &[String], images: &EmbeddingMatrix, count: usize, seed: u64) -> Result<(Vec<String>, EmbeddingMatrix)> {
    let n = images.len();
    if ids.len() != n {
        return Err(Error::IdCountMismatch { ids: ids.len(), count: n });
    }
    if count > n {
        return Err(Error::InvalidArgument(format!("cannot sample {count} of {n} images")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, n, count).into_vec();
    picked.sort_unstable();
    Ok((picked.iter().map(|&i| ids[i].clone()).collect(), images.select(&picked)))
}
