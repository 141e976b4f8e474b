//! Seeded theory checks with pinned tolerances.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::Serialize;

use super::estimators::{estimate_bias, reversed_pair_count, reversed_pair_rate, tts_decomposition_check, variance_decomposition};
use super::policy::{BanditPolicy, Policy, SequencePolicy};
use super::scorer::{sample_scored, split, SyntheticScorer};
use super::train::{reinforce_gradient, surrogate_gradient, Sample};
use super::{SimError, SimRng};
use crate::metrics::{auc, doubled_wins};
use crate::rewards::{gspo_surrogate, SurrogateInput};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-6;
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Bias,
    Variance,
    ReversedPair,
    Tts,
    Gradients,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 6] = ["bias", "variance", "reversed-pair", "tts", "gradients", "all"];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Bias => "bias",
            Suite::Variance => "variance",
            Suite::ReversedPair => "reversed-pair",
            Suite::Tts => "tts",
            Suite::Gradients => "gradients",
            Suite::All => "all",
        }
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "bias" => Suite::Bias,
            "variance" => Suite::Variance,
            "reversed-pair" => Suite::ReversedPair,
            "tts" => Suite::Tts,
            "gradients" => Suite::Gradients,
            "all" => Suite::All,
            _ => return Err(format!("unknown suite {s:?}; expected one of {}", Suite::NAMES.join(", "))),
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub suite: Suite,
    pub name: String,
    pub estimate: f64,
    /// Human-readable acceptance condition, e.g. `<= 3e-3`.
    pub tolerance: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Monte-Carlo sample size for the bias, variance and pair checks.
    pub n: usize,
    /// Scorer substituted for the calibrated one in the bias and variance checks.
    pub inject: Option<SyntheticScorer>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            n: 100_000,
            inject: None,
        }
    }
}

fn at_most(suite: Suite, name: impl Into<String>, estimate: f64, limit: f64) -> CheckResult {
    CheckResult {
        suite,
        name: name.into(),
        estimate,
        tolerance: format!("<= {limit:.3e}"),
        passed: estimate <= limit,
    }
}

fn above(suite: Suite, name: impl Into<String>, estimate: f64, limit: f64) -> CheckResult {
    CheckResult {
        suite,
        name: name.into(),
        estimate,
        tolerance: format!("> {limit:.3e}"),
        passed: estimate > limit,
    }
}

/// Default bandit and sequence policies used by the checks.
pub fn default_sequence_policy() -> SequencePolicy {
    let mut p = SequencePolicy::new(3, 5, vec![2], vec![vec![0, 1, 0, 2, 1], vec![2, 2, 0, 1, 0]], Some(2))
        .expect("valid sequence policy");
    p.logits = vec![0.3, -0.2, 0.1, 0.0, 0.4, -0.1, 0.0, 0.0, 0.0, -0.3, 0.2, 0.5, 0.1, 0.1, -0.4];
    p
}

fn random_bandit(rng: &mut SimRng) -> BanditPolicy {
    let k = rng.random_range(2..8);
    let logits = (0..k).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
    BanditPolicy::new(logits, vec![0.5; k]).expect("valid bandit")
}

fn random_sequence(rng: &mut SimRng) -> SequencePolicy {
    let vocab = rng.random_range(2..6);
    let horizon = rng.random_range(2..7);
    let tools: Vec<usize> = (0..horizon).filter(|_| rng.random::<f64>() < 0.3).take(horizon - 1).collect();
    let target = (0..horizon).map(|_| rng.random_range(0..vocab)).collect();
    let mut p = SequencePolicy::new(vocab, horizon, tools, vec![target], None).expect("valid sequence policy");
    for l in p.logits.iter_mut() {
        *l = 2.0 * rng.sample::<f64, _>(StandardNormal);
    }
    p
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

/// Central finite-difference gradient of `f` at `policy`'s parameters.
pub fn finite_difference<P: Policy + Clone>(policy: &P, f: impl Fn(&P) -> f64) -> Vec<f64> {
    let mut q = policy.clone();
    (0..policy.params().len())
        .map(|j| {
            let x = policy.params()[j];
            q.params_mut()[j] = x + FD_STEP;
            let up = f(&q);
            q.params_mut()[j] = x - FD_STEP;
            let down = f(&q);
            q.params_mut()[j] = x;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Worst relative error of `grad log pi` against finite differences at
/// `points` random policies and trajectories.
pub fn log_prob_gradient_check(points: usize, seed: u64) -> (f64, f64) {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut worst_bandit: f64 = 0.0;
    let mut worst_seq: f64 = 0.0;
    for _ in 0..points {
        let b = random_bandit(&mut rng);
        let tokens = vec![rng.random_range(0..b.arms())];
        worst_bandit = worst_bandit.max(rel_err(&b.grad_log_prob(&tokens), &finite_difference(&b, |q| q.log_prob(&tokens))));

        let s = random_sequence(&mut rng);
        let tokens = s.rollout(&mut rng).tokens;
        worst_seq = worst_seq.max(rel_err(&s.grad_log_prob(&tokens), &finite_difference(&s, |q| q.log_prob(&tokens))));
    }
    (worst_bandit, worst_seq)
}

/// Worst relative error of the REINFORCE gradient of a frozen batch
/// against finite differences of `mean(reward * log pi)`.
pub fn reinforce_gradient_check(points: usize, seed: u64) -> f64 {
    let mut rng = SimRng::seed_from_u64(seed);
    let scorer = SyntheticScorer::calibrated(1.5, 0.5).expect("valid scorer");
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let b = random_bandit(&mut rng);
        let samples: Vec<Sample> = (0..8)
            .map(|_| {
                let rollout = b.rollout(&mut rng);
                let draw = scorer.draw(rollout.correct, 0.0, 0.0, &mut rng);
                Sample {
                    observed: rollout.status,
                    reward: draw.score,
                    rollout,
                    draw,
                }
            })
            .collect();
        let objective = |q: &BanditPolicy| {
            samples.iter().map(|s| s.reward * q.log_prob(&s.rollout.tokens)).sum::<f64>() / samples.len() as f64
        };
        worst = worst.max(rel_err(&reinforce_gradient(&b, &samples), &finite_difference(&b, objective)));
    }
    worst
}

/// Worst relative error of the clipped-surrogate gradient with respect to
/// sequence logits, evaluated away from clip boundaries.
pub fn surrogate_gradient_check(points: usize, seed: u64) -> f64 {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < points {
        let old = random_sequence(&mut rng);
        let mut cur = old.clone();
        for l in cur.params_mut() {
            *l += 0.3 * rng.sample::<f64, _>(StandardNormal);
        }
        let group: Vec<Vec<usize>> = (0..6).map(|_| old.rollout(&mut rng).tokens).collect();
        let adv: Vec<f64> = (0..6).map(|_| rng.sample(StandardNormal)).collect();
        let toks: Vec<&[usize]> = group.iter().map(|t| t.as_slice()).collect();
        let logp_old: Vec<f64> = toks.iter().map(|t| old.log_prob(t)).collect();
        let lengths: Vec<usize> = toks.iter().map(|t| old.policy_len(t)).collect();
        let eps = 0.2;
        let surrogate = |q: &SequencePolicy| {
            gspo_surrogate(&SurrogateInput {
                logp_new: toks.iter().map(|t| q.log_prob(t)).collect(),
                logp_old: logp_old.clone(),
                lengths: lengths.clone(),
                advantages: adv.clone(),
                epsilon: eps,
            })
            .expect("valid surrogate input")
        };
        let out = surrogate(&cur);
        if out.ratios.iter().any(|s| ((s - 1.0).abs() - eps).abs() < 1e-3) {
            continue;
        }
        let analytic = surrogate_gradient(&cur, &toks, &out.dlogp);
        worst = worst.max(rel_err(&analytic, &finite_difference(&cur, |q| surrogate(q).objective)));
        done += 1;
    }
    worst
}

fn bias_checks(opts: &VerifyOptions) -> Result<Vec<CheckResult>, SimError> {
    let s = Suite::Bias;
    let bandit = BanditPolicy::reference();
    let seq = default_sequence_policy();
    let calibrated = opts.inject.unwrap_or(SyntheticScorer::calibrated(2.0, 0.5)?);
    let mut out = Vec::new();

    let est = estimate_bias(&bandit, &calibrated, opts.n, opts.seed)?;
    out.push(at_most(s, "calibrated scorer unbiased: bias norm (bandit, calibrated d=2)", est.norm, 3.0 * est.se));
    let cal_seq = match opts.inject {
        Some(sc) => sc,
        None => SyntheticScorer::calibrated(1.0, 0.3)?,
    };
    let est = estimate_bias(&seq, &cal_seq, opts.n, opts.seed + 1)?;
    out.push(at_most(s, "calibrated scorer unbiased: bias norm (sequence, calibrated d=1)", est.norm, 3.0 * est.se));

    for (label, factor) in [("a=3d", 3.0), ("a=d/3", 1.0 / 3.0)] {
        let sc = SyntheticScorer::distorted(2.0, 0.5, factor)?;
        let est = estimate_bias(&bandit, &sc, opts.n, opts.seed + 2)?;
        out.push(above(s, format!("miscalibrated scorer biased: bias norm (bandit, {label})"), est.norm, 3.0 * est.se));
    }

    let sym = BanditPolicy::uniform(vec![0.5; 4])?;
    let sc = SyntheticScorer::new(2.0, 6.0, 0.0, 0.5)?;
    let est = estimate_bias(&sym, &sc, opts.n, opts.seed + 3)?;
    out.push(at_most(
        s,
        "bias: symmetric arms cancel (max |component| / SE)",
        est.max_z(),
        3.0,
    ));
    Ok(out)
}

fn variance_checks(opts: &VerifyOptions) -> Result<Vec<CheckResult>, SimError> {
    let s = Suite::Variance;
    let bandit = BanditPolicy::reference();
    let calibrated = opts.inject.unwrap_or(SyntheticScorer::calibrated(2.0, 0.5)?);
    let over = SyntheticScorer::distorted(2.0, 0.5, 3.0)?;
    let mut out = Vec::new();
    let vc = variance_decomposition(&bandit, &calibrated, opts.n, opts.seed)?;
    let vo = variance_decomposition(&bandit, &over, opts.n, opts.seed)?;
    out.push(at_most(s, "variance identity: relative residual (calibrated)", vc.relative_residual(), IDENTITY_TOLERANCE));
    out.push(at_most(s, "variance identity: relative residual (a=3d)", vo.relative_residual(), IDENTITY_TOLERANCE));
    let worst_min = (0..50)
        .map(|i| variance_decomposition(&bandit, &over, 2, opts.seed + i).map(|v| v.relative_residual()))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(0.0, f64::max);
    out.push(at_most(s, "variance identity: relative residual (n=2, 50 seeds)", worst_min, IDENTITY_TOLERANCE));
    out.push(above(
        s,
        "variance inflation: Var[dg](a=3d) - Var[dg](calibrated)",
        vo.var_delta - vc.var_delta,
        0.0,
    ));
    Ok(out)
}

fn reversed_pair_checks(opts: &VerifyOptions) -> Result<Vec<CheckResult>, SimError> {
    let s = Suite::ReversedPair;
    let mut out = Vec::new();
    let sc = SyntheticScorer::distorted(1.0, 0.4, 2.0)?;
    let (scores, labels) = split(&sample_scored(&sc, 4000, opts.seed));
    let (rev, pairs) = reversed_pair_count(&scores, &labels);
    let (wins, _) = doubled_wins(&scores, &labels)?;
    out.push(at_most(
        s,
        "reversed pairs + ordered pairs = all pairs (integer count gap)",
        (rev + wins).abs_diff(2 * pairs) as f64,
        0.0,
    ));
    let a = auc(&scores, &labels)?;
    out.push(at_most(
        s,
        "reversed-pair rate = 1 - AUC on the same pairs",
        (rev as f64 / (2 * pairs) as f64 - (1.0 - a)).abs(),
        1e-12,
    ));
    for d in [0.0, 1.0, 2.0] {
        let sc = SyntheticScorer::new(d, d.max(1.0), 0.0, 0.5)?;
        let r = reversed_pair_rate(&sc, opts.n, opts.seed + 1)?;
        let truth = 1.0 - sc.true_auc();
        out.push(at_most(
            s,
            format!("reversed-pair rate vs 1 - Phi(d/sqrt 2), d={d}"),
            (r.rate - truth).abs(),
            3.0 * r.se,
        ));
    }
    let r = reversed_pair_rate(&SyntheticScorer::calibrated(20.0, 0.5)?, opts.n, opts.seed + 2)?;
    out.push(at_most(s, "reversed-pair rate, d=20", r.rate, 1e-4));
    Ok(out)
}

fn tts_checks(opts: &VerifyOptions) -> Result<Vec<CheckResult>, SimError> {
    let s = Suite::Tts;
    let bandit = BanditPolicy::reference();
    let mut out = Vec::new();
    let batches = 20_000;
    let t = tts_decomposition_check(&bandit, &SyntheticScorer::calibrated(1.0, 0.5)?, 4, batches, opts.seed)?;
    out.push(at_most(
        s,
        "top-1 split: weights sum to 1",
        (t.weight_correct + t.weight_incorrect - 1.0).abs(),
        1e-15,
    ));
    out.push(at_most(
        s,
        "top-1 split: weight = RM@k on the same batches",
        (t.weight_correct - t.tts_same_batches).abs(),
        0.0,
    ));
    let se = (t.se * t.se + t.tts_fresh_se * t.tts_fresh_se).sqrt();
    out.push(at_most(
        s,
        "top-1 split: weight vs RM@k on fresh batches (k=4)",
        (t.weight_correct - t.tts_fresh).abs(),
        3.0 * se,
    ));
    out.push(at_most(s, "top-1 split: mixture residual", t.residual, 1e-12));
    let t = tts_decomposition_check(&bandit, &SyntheticScorer::calibrated(20.0, 0.5)?, 16, 5000, opts.seed + 1)?;
    out.push(at_most(s, "top-1: weight on c(top)=0, d=20, k=16", t.weight_incorrect, 1e-3));
    let blind_policy = BanditPolicy::uniform(vec![0.3; 3])?;
    let t = tts_decomposition_check(&blind_policy, &SyntheticScorer::new(0.0, 1.0, 0.0, 0.3)?, 1, batches, opts.seed + 2)?;
    out.push(at_most(s, "top-1: TTS@1 = base rate 0.3, d=0", (t.weight_correct - 0.3).abs(), 3.0 * t.se));
    Ok(out)
}

fn gradient_checks(opts: &VerifyOptions) -> Vec<CheckResult> {
    let s = Suite::Gradients;
    let (b, q) = log_prob_gradient_check(100, opts.seed);
    vec![
        at_most(s, "grad log pi vs finite differences (bandit, 100 points)", b, FD_TOLERANCE),
        at_most(s, "grad log pi vs finite differences (sequence + tool masking, 100 points)", q, FD_TOLERANCE),
        at_most(
            s,
            "REINFORCE frozen-batch gradient vs finite differences",
            reinforce_gradient_check(100, opts.seed + 1),
            FD_TOLERANCE,
        ),
        at_most(
            s,
            "clipped surrogate gradient vs finite differences",
            surrogate_gradient_check(100, opts.seed + 2),
            FD_TOLERANCE,
        ),
    ]
}

/// Runs one suite (or all of them) and returns every check.
pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<Vec<CheckResult>, SimError> {
    Ok(match suite {
        Suite::Bias => bias_checks(opts)?,
        Suite::Variance => variance_checks(opts)?,
        Suite::ReversedPair => reversed_pair_checks(opts)?,
        Suite::Tts => tts_checks(opts)?,
        Suite::Gradients => gradient_checks(opts),
        Suite::All => {
            let mut v = bias_checks(opts)?;
            v.extend(variance_checks(opts)?);
            v.extend(reversed_pair_checks(opts)?);
            v.extend(tts_checks(opts)?);
            v.extend(gradient_checks(opts));
            v
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> VerifyOptions {
        VerifyOptions {
            n: 20_000,
            ..Default::default()
        }
    }

    #[test]
    fn suites_pass() {
        for suite in [Suite::Bias, Suite::Variance, Suite::ReversedPair, Suite::Gradients] {
            for c in run_suite(suite, &small()).unwrap() {
                assert!(c.passed, "{c:?}");
            }
        }
    }

    #[test]
    fn injected_scorer_fails_bias() {
        let opts = VerifyOptions {
            inject: Some(SyntheticScorer::distorted(2.0, 0.5, 3.0).unwrap()),
            ..small()
        };
        let checks = run_suite(Suite::Bias, &opts).unwrap();
        assert!(!checks[0].passed);
    }

    #[test]
    fn suite_names_round_trip() {
        for n in Suite::NAMES {
            assert_eq!(n.parse::<Suite>().unwrap().as_str(), n);
        }
        assert!("nope".parse::<Suite>().is_err());
    }
}
