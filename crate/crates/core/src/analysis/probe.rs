//! One-hidden-layer MLP predicting binary attributes from projection rows.
//!
//! Architecture: `tanh` hidden layer, one sigmoid output per attribute, mean
//! binary cross-entropy over samples and attributes. Training is full-batch
//! gradient descent on standardized inputs with a fixed schedule.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::ProjectionTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            hidden: 32,
            epochs: 500,
            learning_rate: 0.1,
            train_fraction: 0.7,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeResult {
    /// Held-out accuracy per attribute.
    pub accuracies: Vec<f64>,
    /// Attributes with a single class in the training split.
    pub degenerate: Vec<bool>,
    pub train_size: usize,
    pub test_size: usize,
    pub config: ProbeConfig,
    pub architecture: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    /// `hidden x inputs`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `outputs x hidden`, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new(inputs: usize, hidden: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let mut init = |fan_in: usize, fan_out: usize| {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..fan_in * fan_out).map(|_| rng.random_range(-a..a)).collect::<Vec<f64>>()
        };
        Mlp {
            inputs,
            hidden,
            outputs,
            w1: init(inputs, hidden),
            b1: vec![0.0; hidden],
            w2: init(hidden, outputs),
            b2: vec![0.0; outputs],
        }
    }

    fn hidden_layer(&self, x: &[f64]) -> Vec<f64> {
        (0..self.hidden)
            .map(|h| {
                let w = &self.w1[h * self.inputs..(h + 1) * self.inputs];
                (self.b1[h] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()).tanh()
            })
            .collect()
    }

    fn output_logits(&self, hidden: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|o| {
                let w = &self.w2[o * self.hidden..(o + 1) * self.hidden];
                self.b2[o] + w.iter().zip(hidden).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        self.output_logits(&self.hidden_layer(x)).into_iter().map(sigmoid).collect()
    }

    /// Mean binary cross-entropy.
    pub fn loss(&self, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> f64 {
        let mut total = 0.0;
        for (x, y) in xs.iter().zip(ys) {
            let logits = self.output_logits(&self.hidden_layer(x));
            for (z, t) in logits.iter().zip(y) {
                // log(1 + e^z) - t z, stable for large |z|
                total += z.max(0.0) + (-z.abs()).exp().ln_1p() - t * z;
            }
        }
        total / (xs.len() * self.outputs) as f64
    }

    /// Gradient of [`Mlp::loss`], returned in the same layout as the model.
    pub fn gradient(&self, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Mlp {
        let mut g = Mlp {
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.hidden],
            w2: vec![0.0; self.w2.len()],
            b2: vec![0.0; self.outputs],
            ..*self
        };
        let scale = 1.0 / (xs.len() * self.outputs) as f64;
        for (x, y) in xs.iter().zip(ys) {
            let h = self.hidden_layer(x);
            let logits = self.output_logits(&h);
            let mut dh = vec![0.0; self.hidden];
            for o in 0..self.outputs {
                let dz = (sigmoid(logits[o]) - y[o]) * scale;
                g.b2[o] += dz;
                for k in 0..self.hidden {
                    g.w2[o * self.hidden + k] += dz * h[k];
                    dh[k] += dz * self.w2[o * self.hidden + k];
                }
            }
            for k in 0..self.hidden {
                let da = dh[k] * (1.0 - h[k] * h[k]);
                g.b1[k] += da;
                for i in 0..self.inputs {
                    g.w1[k * self.inputs + i] += da * x[i];
                }
            }
        }
        g
    }

    /// All parameters in a fixed order: w1, b1, w2, b2.
    pub fn params(&self) -> Vec<f64> {
        [&self.w1, &self.b1, &self.w2, &self.b2].into_iter().flatten().copied().collect()
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        let mut it = flat.iter().copied();
        for slot in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            slot.iter_mut().for_each(|v| *v = it.next().expect("parameter count"));
        }
    }

    fn step(&mut self, grad: &Mlp, lr: f64) {
        for (p, g) in [
            (&mut self.w1, &grad.w1),
            (&mut self.b1, &grad.b1),
            (&mut self.w2, &grad.w2),
            (&mut self.b2, &grad.b2),
        ] {
            p.iter_mut().zip(g).for_each(|(p, g)| *p -= lr * g);
        }
    }
}

/// Trains the probe on a seeded split and reports held-out accuracy per
/// attribute. `labels[i][a]` is attribute `a` of image row `i`.
pub fn attribute_probe(table: &ProjectionTable, labels: &[Vec<bool>], config: &ProbeConfig) -> Result<ProbeResult> {
    let n = table.len();
    if labels.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} label rows for {n} table rows",
            labels.len()
        )));
    }
    let attrs = labels.first().map_or(0, Vec::len);
    if labels.iter().any(|r| r.len() != attrs) {
        return Err(Error::InvalidArgument("label rows differ in length".into()));
    }
    let train_size = (n as f64 * config.train_fraction).round() as usize;
    if n < 2 || attrs == 0 || train_size == 0 || train_size >= n {
        return Err(Error::InvalidArgument(format!(
            "need a non-empty train and test split, have {n} rows and {attrs} attributes"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let (train_idx, test_idx) = order.split_at(train_size);

    let features = table.values();
    let d = table.width();
    let mut mean = vec![0.0; d];
    let mut std = vec![0.0; d];
    for &i in train_idx {
        for j in 0..d {
            mean[j] += features[i][j] / train_size as f64;
        }
    }
    for &i in train_idx {
        for j in 0..d {
            std[j] += (features[i][j] - mean[j]).powi(2) / train_size as f64;
        }
    }
    std.iter_mut().for_each(|s| *s = if *s > 0.0 { s.sqrt() } else { 1.0 });
    let standardize = |i: usize| -> Vec<f64> { (0..d).map(|j| (features[i][j] - mean[j]) / std[j]).collect() };
    let targets = |i: usize| -> Vec<f64> { labels[i].iter().map(|&b| if b { 1.0 } else { 0.0 }).collect() };

    let xs: Vec<Vec<f64>> = train_idx.iter().map(|&i| standardize(i)).collect();
    let ys: Vec<Vec<f64>> = train_idx.iter().map(|&i| targets(i)).collect();
    let mut model = Mlp::new(d, config.hidden, attrs, &mut rng);
    for _ in 0..config.epochs {
        let g = model.gradient(&xs, &ys);
        model.step(&g, config.learning_rate);
    }

    let mut correct = vec![0usize; attrs];
    for &i in test_idx {
        let p = model.predict(&standardize(i));
        for a in 0..attrs {
            if (p[a] >= 0.5) == labels[i][a] {
                correct[a] += 1;
            }
        }
    }
    let degenerate = (0..attrs)
        .map(|a| {
            let pos = train_idx.iter().filter(|&&i| labels[i][a]).count();
            pos == 0 || pos == train_size
        })
        .collect();
    Ok(ProbeResult {
        accuracies: correct.iter().map(|&c| c as f64 / test_idx.len() as f64).collect(),
        degenerate,
        train_size,
        test_size: test_idx.len(),
        config: *config,
        architecture: format!("mlp({d}-{}-{attrs}, tanh, sigmoid)", config.hidden),
    })
}
