//! Independent reference computations used as test oracles. Nothing here
//! calls into the library's numeric code; inputs are plain slices.
#![allow(dead_code)]

use tpca::{Backend, GuidanceConfig, TokenId};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Double-loop variance score: mean over phrases of the population
/// variance of projections.
pub fn variance_score(phrases: &[Vec<f64>], images: &[Vec<f64>]) -> f64 {
    let n = images.len() as f64;
    let mut total = 0.0;
    for p in phrases {
        let mut mu = 0.0;
        for x in images {
            mu += dot(p, x);
        }
        mu /= n;
        let mut var = 0.0;
        for x in images {
            let d = dot(p, x) - mu;
            var += d * d;
        }
        total += var / n;
    }
    total / phrases.len() as f64
}

/// `V` via the two-pass formula with an explicit difference vector.
pub fn v_term(candidate: &[f64], s0: &[f64], images: &[Vec<f64>]) -> f64 {
    let scores: Vec<f64> = images
        .iter()
        .map(|x| {
            let mut m = 0.0;
            for j in 0..x.len() {
                m += (candidate[j] - s0[j]) * x[j];
            }
            m
        })
        .collect();
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    scores.iter().map(|m| (m - mean) * (m - mean)).sum()
}

pub fn o_term(candidate: &[f64], previous: &[Vec<f64>]) -> f64 {
    previous.iter().map(|p| dot(candidate, p)).sum()
}

pub fn projections(phrases: &[Vec<f64>], images: &[Vec<f64>]) -> Vec<Vec<f64>> {
    images
        .iter()
        .map(|x| phrases.iter().map(|p| dot(p, x)).collect())
        .collect()
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order with matching unit eigenvectors.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| m[i][j] * m[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n).map(|i| (m[i][i], (0..n).map(|k| v[k][i]).collect())).collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    pairs.into_iter().unzip()
}

/// Population covariance of the rows.
pub fn covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mut mean = vec![0.0; d];
    for r in rows {
        for j in 0..d {
            mean[j] += r[j] / n;
        }
    }
    let mut c = vec![vec![0.0; d]; d];
    for r in rows {
        for i in 0..d {
            for j in 0..d {
                c[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]) / n;
            }
        }
    }
    c
}

/// Brute-force recomputation of one guided decode step: every candidate's
/// modified score from scratch, then the argmax (lowest id on ties).
///
/// `prefix` is the full prefix (BOS + prompt + generated so far) and
/// `prompt_len` the number of ids before the first generated token.
pub fn brute_guided_choice(
    backend: &dyn Backend,
    prefix: &[TokenId],
    prompt_len: usize,
    condition: &[f64],
    s0: &[f64],
    previous: &[Vec<f64>],
    images: &[Vec<f64>],
    config: &GuidanceConfig,
) -> TokenId {
    let meta = backend.meta();
    let cond = tpca::Embedding::from_unit(condition.to_vec()).unwrap();
    let dist = backend.next_token(prefix, &cond).unwrap();
    let lp = dist.log_probs();
    let generated = &prefix[prompt_len..];

    let mut ids: Vec<TokenId> = (0..meta.vocab_size as TokenId)
        .filter(|&t| t != meta.bos_id && !(generated.is_empty() && t == meta.eos_id))
        .collect();
    ids.sort_by(|&a, &b| lp[b as usize].partial_cmp(&lp[a as usize]).unwrap().then(a.cmp(&b)));
    ids.truncate(config.pc_top_k);

    let mut best: Option<(f64, TokenId)> = None;
    for k in ids {
        let mut seq = generated.to_vec();
        if k != meta.eos_id {
            seq.push(k);
        }
        let text = backend.detokenize(&seq).unwrap();
        let e = backend.encode_text(&text).unwrap();
        let e = e.as_slice();
        let score = lp[k as usize] + config.lambda_v * v_term(e, s0, images) - config.lambda_o * o_term(e, previous);
        let better = match best {
            None => true,
            Some((s, t)) => score > s || (score == s && k < t),
        };
        if better {
            best = Some((score, k));
        }
    }
    best.unwrap().1
}
