//! Monte-Carlo estimators for the gradient-level effects of verifier
//! ranking errors and miscalibration.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};

use super::policy::Policy;
use super::scorer::SyntheticScorer;
use super::train::score_rollouts;
use super::{SimError, SimRng};
use crate::metrics::{rm_at_k, RmAtKOptions};
use crate::rewards::Status;
use crate::scalar::pairwise_sum;
use crate::trajdata::{Dataset, TrajectoryRecord};

/// Column means of a row-major `n x dim` matrix, reduced pairwise.
fn column_means(rows: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let n = rows.len() as f64;
    (0..dim)
        .map(|j| {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            pairwise_sum(&col) / n
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sample_mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    (m, (pairwise_sum(&sq) / (n - 1.0) / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReversedPairs {
    pub rate: f64,
    pub se: f64,
    pub n_pairs: usize,
}

/// Fraction of independent (positive, negative) pairs the scorer orders
/// wrongly, ties counted one half.
pub fn reversed_pair_rate(scorer: &SyntheticScorer, n_pairs: usize, seed: u64) -> Result<ReversedPairs, SimError> {
    if n_pairs == 0 {
        return Err(SimError::Config("n_pairs must be at least 1".into()));
    }
    let mut rng = SimRng::seed_from_u64(seed);
    let vals: Vec<f64> = (0..n_pairs)
        .map(|_| {
            let pos = scorer.draw(true, 0.0, 0.0, &mut rng).score;
            let neg = scorer.draw(false, 0.0, 0.0, &mut rng).score;
            if neg > pos {
                1.0
            } else if neg == pos {
                0.5
            } else {
                0.0
            }
        })
        .collect();
    let (rate, se) = sample_mean_se(&vals);
    Ok(ReversedPairs { rate, se, n_pairs })
}

/// Reversed pairs over every (positive, negative) pair of a sample, by
/// direct enumeration: `(2 * reversed + ties, pairs)`.
pub fn reversed_pair_count(scores: &[f64], labels: &[bool]) -> (u128, u128) {
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(&s, _)| s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(&s, _)| s).collect();
    let mut doubled = 0u128;
    for &p in &pos {
        for &q in &neg {
            doubled += match q.partial_cmp(&p) {
                Some(std::cmp::Ordering::Greater) => 2,
                Some(std::cmp::Ordering::Equal) => 1,
                _ => 0,
            };
        }
    }
    (doubled, pos.len() as u128 * neg.len() as u128)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasEstimate {
    /// Mean of `grad log pi * (r - E[c | r])`.
    pub vector: Vec<f64>,
    /// Standard error of each component.
    pub component_se: Vec<f64>,
    pub norm: f64,
    /// Jackknife standard error of `norm`.
    pub se: f64,
    pub n: usize,
}

impl BiasEstimate {
    /// Largest `|component| / se`, or 0 when every component is exactly 0.
    pub fn max_z(&self) -> f64 {
        self.vector
            .iter()
            .zip(&self.component_se)
            .map(|(&v, &s)| if v == 0.0 { 0.0 } else { v.abs() / s })
            .fold(0.0, f64::max)
    }
}

/// Per-sample `(score gradient, r, E[c | r])`.
fn gradient_samples<P: Policy, R: Rng + ?Sized>(
    policy: &P,
    scorer: &SyntheticScorer,
    n: usize,
    rng: &mut R,
) -> Vec<(Vec<f64>, f64, f64)> {
    score_rollouts(policy, scorer, n, 0.0, rng)
        .into_iter()
        .map(|(ro, draw)| (policy.grad_log_prob(&ro.tokens), draw.score, scorer.posterior_of_latent(draw.z)))
        .collect()
}

/// Monte-Carlo estimate of the gradient bias induced by miscalibration,
/// using the scorer's closed-form posterior.
pub fn estimate_bias<P: Policy>(policy: &P, scorer: &SyntheticScorer, n: usize, seed: u64) -> Result<BiasEstimate, SimError> {
    if n < 2 {
        return Err(SimError::Config("bias estimate needs n >= 2".into()));
    }
    let mut rng = SimRng::seed_from_u64(seed);
    let dim = policy.params().len();
    let rows: Vec<Vec<f64>> = gradient_samples(policy, scorer, n, &mut rng)
        .into_iter()
        .map(|(g, r, post)| g.into_iter().map(|x| x * (r - post)).collect())
        .collect();
    let vector = column_means(&rows, dim);
    let nf = n as f64;
    let component_se = (0..dim)
        .map(|j| {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            sample_mean_se(&col).1
        })
        .collect();
    let total: Vec<f64> = vector.iter().map(|m| m * nf).collect();
    let loo: Vec<f64> = rows
        .iter()
        .map(|x| {
            let v: Vec<f64> = total.iter().zip(x).map(|(t, xi)| (t - xi) / (nf - 1.0)).collect();
            norm(&v)
        })
        .collect();
    let loo_mean = pairwise_sum(&loo) / nf;
    let ss: Vec<f64> = loo.iter().map(|t| (t - loo_mean) * (t - loo_mean)).collect();
    Ok(BiasEstimate {
        norm: norm(&vector),
        se: ((nf - 1.0) / nf * pairwise_sum(&ss)).sqrt(),
        vector,
        component_se,
        n,
    })
}

/// Trace variances of `g = r grad log pi`, `g* = E[c|r] grad log pi` and
/// `dg = g* - g`, with `cov_term = tr Cov(g*, g - g*)` so that
/// `var_g = var_g_star + var_delta + 2 cov_term` holds on the sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceDecomposition {
    pub var_g: f64,
    pub var_g_star: f64,
    pub var_delta: f64,
    pub cov_term: f64,
    pub n: usize,
}

impl VarianceDecomposition {
    /// `|var_g - (var_g_star + var_delta + 2 cov_term)| / var_g`.
    pub fn relative_residual(&self) -> f64 {
        let rhs = self.var_g_star + self.var_delta + 2.0 * self.cov_term;
        let scale = self.var_g.abs().max(f64::MIN_POSITIVE);
        (self.var_g - rhs).abs() / scale
    }
}

fn trace_cov(a: &[Vec<f64>], b: &[Vec<f64>], dim: usize) -> f64 {
    let ma = column_means(a, dim);
    let mb = column_means(b, dim);
    let denom = a.len() as f64 - 1.0;
    (0..dim)
        .map(|j| {
            let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x[j] - ma[j]) * (y[j] - mb[j])).collect();
            pairwise_sum(&prods) / denom
        })
        .sum()
}

pub fn variance_decomposition<P: Policy>(
    policy: &P,
    scorer: &SyntheticScorer,
    n: usize,
    seed: u64,
) -> Result<VarianceDecomposition, SimError> {
    if n < 2 {
        return Err(SimError::Config("variance decomposition needs n >= 2".into()));
    }
    let mut rng = SimRng::seed_from_u64(seed);
    let dim = policy.params().len();
    let mut g = Vec::with_capacity(n);
    let mut g_star = Vec::with_capacity(n);
    let mut delta = Vec::with_capacity(n);
    let mut minus_delta = Vec::with_capacity(n);
    for (grad, r, post) in gradient_samples(policy, scorer, n, &mut rng) {
        g.push(grad.iter().map(|x| r * x).collect::<Vec<f64>>());
        g_star.push(grad.iter().map(|x| post * x).collect::<Vec<f64>>());
        delta.push(grad.iter().map(|x| (post - r) * x).collect::<Vec<f64>>());
        minus_delta.push(grad.iter().map(|x| (r - post) * x).collect::<Vec<f64>>());
    }
    Ok(VarianceDecomposition {
        var_g: trace_cov(&g, &g, dim),
        var_g_star: trace_cov(&g_star, &g_star, dim),
        var_delta: trace_cov(&delta, &delta, dim),
        cov_term: trace_cov(&g_star, &minus_delta, dim),
        n,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TtsDecomposition {
    pub k: usize,
    pub n_batches: usize,
    /// Batches whose top-scored sample is correct.
    pub n_correct: usize,
    /// Fraction of batches whose top-scored sample is correct.
    pub weight_correct: f64,
    pub weight_incorrect: f64,
    pub se: f64,
    /// RM@k of the same batches computed by the metrics module.
    pub tts_same_batches: f64,
    /// RM@k on an independent set of batches.
    pub tts_fresh: f64,
    pub tts_fresh_se: f64,
    /// Mean batch update `(1/k) sum_i r_i grad log pi(tau_i)` under each event.
    pub update_correct: Vec<f64>,
    pub update_incorrect: Vec<f64>,
    pub update_total: Vec<f64>,
    /// Norm of `update_total - (w1 update_correct + w0 update_incorrect)`.
    pub residual: f64,
}

fn batches<P: Policy, R: Rng + ?Sized>(
    policy: &P,
    scorer: &SyntheticScorer,
    k: usize,
    n_batches: usize,
    rng: &mut R,
) -> Vec<Vec<(Vec<usize>, f64, bool)>> {
    (0..n_batches)
        .map(|_| {
            score_rollouts(policy, scorer, k, 0.0, rng)
                .into_iter()
                .map(|(ro, d)| (ro.tokens, d.score, ro.correct))
                .collect()
        })
        .collect()
}

fn top_index(batch: &[(Vec<usize>, f64, bool)]) -> usize {
    let mut best = 0;
    for (i, s) in batch.iter().enumerate() {
        if s.1 > batch[best].1 {
            best = i;
        }
    }
    best
}

fn batches_dataset(batches: &[Vec<(Vec<usize>, f64, bool)>]) -> Dataset<f64> {
    let records = batches
        .iter()
        .enumerate()
        .flat_map(|(b, batch)| {
            batch.iter().enumerate().map(move |(i, (_, s, c))| {
                TrajectoryRecord::new(
                    format!("batch{b:08}"),
                    i as u64,
                    *s,
                    if *c { Status::Resolved } else { Status::Failed },
                )
            })
        })
        .collect();
    Dataset::from_records(records, BTreeMap::new()).expect("generated keys are unique")
}

/// Splits the score-weighted batch update by whether the top-scored sample
/// is correct and checks the mixture weights against RM@k.
pub fn tts_decomposition_check<P: Policy>(
    policy: &P,
    scorer: &SyntheticScorer,
    k: usize,
    n_batches: usize,
    seed: u64,
) -> Result<TtsDecomposition, SimError> {
    if k == 0 || n_batches == 0 {
        return Err(SimError::Config("k and n_batches must be at least 1".into()));
    }
    let dim = policy.params().len();
    let mut rng = SimRng::seed_from_u64(seed);
    let sample = batches(policy, scorer, k, n_batches, &mut rng);
    let mut fresh_rng = SimRng::seed_from_u64(seed);
    fresh_rng.set_stream(1);
    let fresh = batches(policy, scorer, k, n_batches, &mut fresh_rng);

    let inv_k = 1.0 / k as f64;
    let mut hits = Vec::with_capacity(n_batches);
    let mut upd_pos = Vec::new();
    let mut upd_neg = Vec::new();
    let mut upd_all = Vec::with_capacity(n_batches);
    for batch in &sample {
        let mut u = vec![0.0; dim];
        for (tokens, r, _) in batch {
            for (ui, gi) in u.iter_mut().zip(policy.grad_log_prob(tokens)) {
                *ui += inv_k * r * gi;
            }
        }
        let ok = batch[top_index(batch)].2;
        hits.push(f64::from(u8::from(ok)));
        if ok {
            upd_pos.push(u.clone());
        } else {
            upd_neg.push(u.clone());
        }
        upd_all.push(u);
    }
    let n_pos = upd_pos.len();
    let weight_correct = n_pos as f64 / n_batches as f64;
    let weight_incorrect = (n_batches - n_pos) as f64 / n_batches as f64;
    let (_, se) = sample_mean_se(&hits);
    let cond = |rows: &[Vec<f64>]| if rows.is_empty() { vec![0.0; dim] } else { column_means(rows, dim) };
    let update_correct = cond(&upd_pos);
    let update_incorrect = cond(&upd_neg);
    let update_total = column_means(&upd_all, dim);
    let mix: Vec<f64> = update_correct
        .iter()
        .zip(&update_incorrect)
        .map(|(a, b)| weight_correct * a + weight_incorrect * b)
        .collect();
    let residual = norm(&update_total.iter().zip(&mix).map(|(a, b)| a - b).collect::<Vec<_>>());

    let opts = RmAtKOptions::default();
    let tts_same_batches = rm_at_k(&batches_dataset(&sample), k, &opts)?.mean;
    let fresh_hits: Vec<f64> = fresh.iter().map(|b| f64::from(u8::from(b[top_index(b)].2))).collect();
    let (_, tts_fresh_se) = sample_mean_se(&fresh_hits);
    let tts_fresh = rm_at_k(&batches_dataset(&fresh), k, &opts)?.mean;
    Ok(TtsDecomposition {
        k,
        n_batches,
        n_correct: n_pos,
        weight_correct,
        weight_incorrect,
        se,
        tts_same_batches,
        tts_fresh,
        tts_fresh_se,
        update_correct,
        update_incorrect,
        update_total,
        residual,
    })
}
