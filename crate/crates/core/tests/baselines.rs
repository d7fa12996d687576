mod support;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use tpca::baselines::{pca_directions, spherical_kmeans};
use tpca::EmbeddingMatrix;

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Anisotropic cloud with distinct variances, so eigenvectors are unique.
fn anisotropic(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset: Vec<f64> = (0..d).map(|_| gaussian(&mut rng)).collect();
    (0..n)
        .map(|_| (0..d).map(|j| offset[j] + gaussian(&mut rng) * (d - j) as f64 * 0.3).collect())
        .collect()
}

#[test]
fn pca_matches_covariance_eigenvectors() {
    for (seed, d) in [(1, 3), (2, 5), (3, 8), (4, 8)] {
        let rows = anisotropic(seed, 200, d);
        // EmbeddingMatrix normalizes rows; the oracle sees the same rows
        let m = EmbeddingMatrix::from_rows(d, rows).unwrap();
        let rows: Vec<Vec<f64>> = m.rows().map(<[f64]>::to_vec).collect();
        let (vals, vecs) = support::jacobi_eigen(&support::covariance(&rows));
        let k = d.min(4);
        let set = pca_directions(&m, k).unwrap();
        for i in 0..k {
            let cos = support::dot(&set.directions[i], &vecs[i]);
            assert!((cos.abs() - 1.0).abs() < 1e-6, "seed {seed} dir {i} cos {cos}");
            // singular value squared over n is the covariance eigenvalue
            assert!((set.stats[i].powi(2) / 200.0 - vals[i]).abs() < 1e-9);
            let dir = &set.directions[i];
            let big = dir.iter().cloned().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            assert!(big > 0.0);
        }
        for i in 0..k {
            for j in 0..k {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((support::dot(&set.directions[i], &set.directions[j]) - want).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn pca_isotropic_singular_values_are_close() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    // rows of norm ~sqrt(d) normalize to near-uniform directions; keep the
    // cloud isotropic in the plane of the first two axes
    let rows: Vec<Vec<f64>> = (0..10_000)
        .map(|_| {
            let mut r = vec![10.0, 0.0, 0.0];
            r[1] = gaussian(&mut rng);
            r[2] = gaussian(&mut rng);
            r
        })
        .collect();
    let m = EmbeddingMatrix::from_rows(3, rows).unwrap();
    let set = pca_directions(&m, 2).unwrap();
    let ratio = set.stats[1] / set.stats[0];
    assert!(ratio > 0.95, "ratio {ratio}");
}

#[test]
fn pca_reconstruction_error_is_monotone() {
    let m = EmbeddingMatrix::from_rows(8, anisotropic(5, 100, 8)).unwrap();
    let rows: Vec<Vec<f64>> = m.rows().map(<[f64]>::to_vec).collect();
    let mean: Vec<f64> = (0..8).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / 100.0).collect();
    let error = |k: usize| -> f64 {
        let set = pca_directions(&m, k).unwrap();
        rows.iter()
            .map(|r| {
                let c: Vec<f64> = r.iter().zip(&mean).map(|(a, b)| a - b).collect();
                let mut rec = vec![0.0; 8];
                for d in &set.directions {
                    let t = support::dot(&c, d);
                    rec.iter_mut().zip(d).for_each(|(x, v)| *x += t * v);
                }
                c.iter().zip(&rec).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            })
            .sum()
    };
    let errs: Vec<f64> = (0..=8).map(error).collect();
    assert!(errs.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{errs:?}");
    assert!(errs[8] < 1e-20);
}

#[test]
fn pca_recovers_planted_axis() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let axis = [0.6, -0.48, 0.64, 0.0];
    let rows: Vec<Vec<f64>> = (0..300)
        .map(|i| {
            let t = if i % 2 == 0 { 1.0 } else { -1.0 } * (1.0 + gaussian(&mut rng).abs());
            axis.iter().map(|a| a * t + 0.01 * gaussian(&mut rng)).collect()
        })
        .collect();
    let m = EmbeddingMatrix::from_rows(4, rows).unwrap();
    let set = pca_directions(&m, 1).unwrap();
    assert!(support::dot(&set.directions[0], &axis).abs() >= 0.99);
}

fn antipodal(seed: u64) -> (EmbeddingMatrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut axis: Vec<f64> = (0..10).map(|_| gaussian(&mut rng)).collect();
    let norm = support::dot(&axis, &axis).sqrt();
    axis.iter_mut().for_each(|a| *a /= norm);
    let rows: Vec<Vec<f64>> = (0..200)
        .map(|i| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            axis.iter().map(|a| s * a + 0.05 * gaussian(&mut rng)).collect()
        })
        .collect();
    (EmbeddingMatrix::from_rows(10, rows).unwrap(), axis)
}

#[test]
fn kmeans_recovers_antipodal_clusters() {
    for seed in 0..5 {
        let (m, axis) = antipodal(seed);
        let km = spherical_kmeans(&m, 2, seed).unwrap();
        // planted means: normalized mean of each half
        for sign in [1.0, -1.0] {
            let members: Vec<&[f64]> = m.rows().filter(|r| sign * support::dot(r, &axis) > 0.0).collect();
            let mut mean = vec![0.0; 10];
            for r in &members {
                mean.iter_mut().zip(r.iter()).for_each(|(a, b)| *a += b);
            }
            let norm = support::dot(&mean, &mean).sqrt();
            mean.iter_mut().for_each(|a| *a /= norm);
            let best = km
                .centroids
                .directions
                .iter()
                .map(|c| support::dot(c, &mean))
                .fold(f64::NEG_INFINITY, f64::max);
            let angle = best.min(1.0).acos().to_degrees();
            assert!(angle < 2.0, "seed {seed} angle {angle}");
        }
    }
}

#[test]
fn kmeans_objective_never_increases() {
    for seed in 0..10 {
        let m = EmbeddingMatrix::from_rows(6, anisotropic(seed, 150, 6)).unwrap();
        let km = spherical_kmeans(&m, 5, seed).unwrap();
        assert!(km.objective.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{:?}", km.objective);
        for c in &km.centroids.directions {
            assert!((support::dot(c, c).sqrt() - 1.0).abs() < 1e-6);
        }
        assert_eq!(km.centroids.stats.iter().sum::<f64>(), 150.0);
        assert_eq!(spherical_kmeans(&m, 5, seed).unwrap(), km);
    }
}
