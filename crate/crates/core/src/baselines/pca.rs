use log::warn;
use nalgebra::DMatrix;

use super::{DirectionMethod, DirectionSet};
use crate::backend::EmbeddingMatrix;
use crate::error::{Error, Result};

/// Top-`k` right singular vectors of the row-centered image matrix, by
/// descending singular value.
///
/// Each direction is flipped so its largest-magnitude coordinate is
/// positive. Directions whose singular value is numerically zero are dropped
/// and the set is flagged `rank_deficient`.
pub fn pca_directions(images: &EmbeddingMatrix, k: usize) -> Result<DirectionSet> {
    if k == 0 {
        return Ok(DirectionSet::empty(DirectionMethod::Pca));
    }
    let (n, d) = (images.len(), images.dim());
    if n < 2 {
        return Err(Error::InvalidArgument(format!("PCA needs at least 2 images, got {n}")));
    }
    if k > n.min(d) {
        return Err(Error::InvalidArgument(format!(
            "cannot extract {k} components from {n} images of dimension {d}"
        )));
    }

    let mut mean = vec![0.0; d];
    for row in images.rows() {
        mean.iter_mut().zip(row).for_each(|(m, v)| *m += v / n as f64);
    }
    let centered = DMatrix::from_fn(n, d, |i, j| images.row(i)[j] - mean[j]);
    let svd = centered.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));

    let top = order.first().map_or(0.0, |&i| svd.singular_values[i]);
    let tol = f64::EPSILON * (n.max(d) as f64) * top.max(1.0) * 16.0;

    let mut set = DirectionSet::empty(DirectionMethod::Pca);
    for &i in order.iter().take(k) {
        let sv = svd.singular_values[i];
        if sv <= tol {
            set.rank_deficient = true;
            break;
        }
        let mut dir: Vec<f64> = v_t.row(i).iter().copied().collect();
        orient(&mut dir);
        set.directions.push(dir);
        set.stats.push(sv);
    }
    if set.rank_deficient {
        warn!("PCA: only {} of {k} requested directions are independent", set.len());
    }
    Ok(set)
}

/// Flips `v` so that its largest-magnitude coordinate (first on ties) is
/// positive.
fn orient(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal, StandardNormal};

    fn dotv(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn cloud(seed: u64, n: usize, d: usize) -> EmbeddingMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        EmbeddingMatrix::from_rows(
            d,
            (0..n).map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect::<Vec<f64>>()),
        )
        .unwrap()
    }

    #[test]
    fn zero_components() {
        let m = cloud(1, 5, 3);
        assert!(pca_directions(&m, 0).unwrap().is_empty());
    }

    #[test]
    fn too_many_components() {
        let m = cloud(1, 5, 3);
        assert!(pca_directions(&m, 4).is_err());
        assert!(pca_directions(&cloud(1, 1, 3), 1).is_err());
    }

    #[test]
    fn orthonormal_and_descending() {
        let m = cloud(2, 40, 6);
        let set = pca_directions(&m, 5).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dotv(&set.directions[i], &set.directions[j]) - expect).abs() < 1e-6);
            }
            let d = &set.directions[i];
            let big = d.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            assert!(big > 0.0);
        }
        assert!(set.stats.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn line_through_origin_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let axis = [0.6, -0.48, 0.64];
        let noise = Normal::new(0.0, 0.01).unwrap();
        let rows = (0..200).map(|i| {
            let t = if i % 2 == 0 { 1.0 } else { -1.0 } * (0.5 + (i as f64) / 400.0);
            axis.iter().map(|a| a * t + noise.sample(&mut rng)).collect::<Vec<f64>>()
        });
        let m = EmbeddingMatrix::from_rows(3, rows).unwrap();
        let set = pca_directions(&m, 1).unwrap();
        assert!(dotv(&set.directions[0], &axis).abs() >= 0.99);
    }

    #[test]
    fn identical_points_are_rank_deficient() {
        let m = EmbeddingMatrix::from_rows(3, vec![vec![1.0, 0.0, 0.0]; 4]).unwrap();
        let set = pca_directions(&m, 2).unwrap();
        assert!(set.rank_deficient);
        assert!(set.is_empty());
    }
}
