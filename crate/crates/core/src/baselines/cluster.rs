use kodama::{linkage, Method};
use serde::Serialize;

use crate::backend::{dot, EmbeddingMatrix};
use crate::error::{Error, Result};

/// One merge of the dendrogram. Labels `< n` are items; label `n + i` is the
/// cluster created by merge `i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterTree {
    pub items: usize,
    pub merges: Vec<Merge>,
    /// Flat cluster per item at the requested cluster count.
    pub assignment: Vec<usize>,
    pub clusters: usize,
}

impl ClusterTree {
    /// Flat labels after applying the first `items - k` merges. Labels are
    /// numbered by first appearance in item order.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>> {
        if k == 0 || k > self.items {
            return Err(Error::InvalidArgument(format!(
                "cluster count {k} outside 1..={}",
                self.items
            )));
        }
        let n = self.items;
        let mut parent: Vec<usize> = (0..2 * n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (i, m) in self.merges.iter().take(n - k).enumerate() {
            let new = n + i;
            let (ra, rb) = (find(&mut parent, m.a), find(&mut parent, m.b));
            parent[ra] = new;
            parent[rb] = new;
        }
        let mut labels = vec![usize::MAX; 2 * n];
        let mut next = 0;
        Ok((0..n)
            .map(|i| {
                let r = find(&mut parent, i);
                if labels[r] == usize::MAX {
                    labels[r] = next;
                    next += 1;
                }
                labels[r]
            })
            .collect())
    }
}

/// Average-linkage agglomerative clustering under cosine distance, cut at
/// `k` clusters.
pub fn agglomerative_cluster(images: &EmbeddingMatrix, k: usize) -> Result<ClusterTree> {
    let n = images.len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("cluster count {k} outside 1..={n}")));
    }
    let mut condensed = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            condensed.push((1.0 - dot(images.row(i), images.row(j))).max(0.0));
        }
    }
    let merges = if n > 1 {
        linkage(&mut condensed, n, Method::Average)
            .steps()
            .iter()
            .map(|s| Merge {
                a: s.cluster1,
                b: s.cluster2,
                distance: s.dissimilarity,
                size: s.size,
            })
            .collect()
    } else {
        Vec::new()
    };
    let mut tree = ClusterTree {
        items: n,
        merges,
        assignment: Vec::new(),
        clusters: k,
    };
    tree.assignment = tree.cut(k)?;
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn three_blobs() -> (EmbeddingMatrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = Normal::new(0.0, 0.03).unwrap();
        let centers = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for i in 0..30 {
            let c = i % 3;
            rows.push(centers[c].iter().map(|x| x + noise.sample(&mut rng)).collect::<Vec<f64>>());
            truth.push(c);
        }
        (EmbeddingMatrix::from_rows(4, rows).unwrap(), truth)
    }

    #[test]
    fn extremes() {
        let (m, _) = three_blobs();
        let all = agglomerative_cluster(&m, 1).unwrap();
        assert!(all.assignment.iter().all(|&c| c == 0));
        let single = agglomerative_cluster(&m, 30).unwrap();
        assert_eq!(single.assignment, (0..30).collect::<Vec<_>>());
        assert!(agglomerative_cluster(&m, 0).is_err());
        assert!(agglomerative_cluster(&m, 31).is_err());
    }

    #[test]
    fn planted_blobs_recovered() {
        let (m, truth) = three_blobs();
        let tree = agglomerative_cluster(&m, 3).unwrap();
        // first-appearance labeling matches the planting order 0,1,2,0,1,2...
        assert_eq!(tree.assignment, truth);
    }

    #[test]
    fn merges_monotone_and_cuts_nest() {
        let (m, _) = three_blobs();
        let tree = agglomerative_cluster(&m, 3).unwrap();
        assert!(tree.merges.windows(2).all(|w| w[0].distance <= w[1].distance + 1e-12));
        for k in 2..=30 {
            let fine = tree.cut(k).unwrap();
            let coarse = tree.cut(k - 1).unwrap();
            // exactly two fine clusters became one coarse cluster
            let mut pairs: Vec<(usize, usize)> = fine.iter().copied().zip(coarse.iter().copied()).collect();
            pairs.sort_unstable();
            pairs.dedup();
            assert_eq!(pairs.len(), k);
            let mut coarse_ids: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            coarse_ids.sort_unstable();
            coarse_ids.dedup();
            assert_eq!(coarse_ids.len(), k - 1);
        }
    }

    #[test]
    fn single_item() {
        let m = EmbeddingMatrix::from_rows(2, vec![vec![1.0, 0.0]]).unwrap();
        assert_eq!(agglomerative_cluster(&m, 1).unwrap().assignment, vec![0]);
    }
}
