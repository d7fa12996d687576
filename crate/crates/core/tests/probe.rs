use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use tpca::analysis::{attribute_probe, Mlp, ProbeConfig, ProjectionTable};

fn table(rows: Vec<Vec<f64>>) -> ProjectionTable {
    let l = rows[0].len();
    ProjectionTable {
        image_ids: (0..rows.len()).map(|i| format!("x{i}")).collect(),
        labels: (0..l).map(|j| format!("p{j}")).collect(),
        means: vec![0.0; l],
        raw: rows,
        centered: false,
    }
}

fn gaussian_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()).collect()
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let xs = gaussian_rows(5, 4, 4);
    let ys: Vec<Vec<f64>> = (0..5).map(|_| (0..3).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect()).collect();
    let mut model = Mlp::new(4, 6, 3, &mut rng);
    let analytic = model.gradient(&xs, &ys).params();
    let theta = model.params();
    let h = 1e-5;
    for i in 0..theta.len() {
        let mut t = theta.clone();
        t[i] = theta[i] + h;
        model.set_params(&t);
        let up = model.loss(&xs, &ys);
        t[i] = theta[i] - h;
        model.set_params(&t);
        let down = model.loss(&xs, &ys);
        let numeric = (up - down) / (2.0 * h);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
        assert!((analytic[i] - numeric).abs() / denom < 1e-4, "param {i}: {} vs {numeric}", analytic[i]);
    }
}

#[test]
fn separable_attribute_is_learned() {
    let rows = gaussian_rows(200, 5, 10);
    let labels: Vec<Vec<bool>> = rows.iter().map(|r| vec![r[1] > 0.0]).collect();
    let r = attribute_probe(&table(rows), &labels, &ProbeConfig::default()).unwrap();
    assert!(r.accuracies[0] >= 0.95, "{:?}", r.accuracies);
    assert_eq!((r.train_size, r.test_size), (140, 60));
    assert_eq!(r.degenerate, vec![false]);
}

#[test]
fn coin_flips_stay_near_chance() {
    let rows = gaussian_rows(200, 5, 11);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let labels: Vec<Vec<bool>> = (0..200).map(|_| vec![rng.random_bool(0.5)]).collect();
    let r = attribute_probe(&table(rows), &labels, &ProbeConfig::default()).unwrap();
    assert!((0.35..=0.65).contains(&r.accuracies[0]), "{:?}", r.accuracies);
}

#[test]
fn probe_is_deterministic() {
    let rows = gaussian_rows(40, 3, 13);
    let labels: Vec<Vec<bool>> = rows.iter().map(|r| vec![r[0] > 0.0, r[2] > 0.5]).collect();
    let cfg = ProbeConfig {
        epochs: 50,
        seed: 9,
        ..Default::default()
    };
    let t = table(rows);
    assert_eq!(attribute_probe(&t, &labels, &cfg).unwrap(), attribute_probe(&t, &labels, &cfg).unwrap());
}
