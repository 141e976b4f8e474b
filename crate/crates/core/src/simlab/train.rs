//! Single optimisation steps: REINFORCE on the bandit, GSPO on sequences.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::policy::{BanditPolicy, Policy, Rollout, SequencePolicy};
use super::scorer::{ScoredDraw, SyntheticScorer};
use super::SimError;
use crate::rewards::{group_advantage_of, gspo_surrogate, hybrid_reward, HybridRewardInput, Status, SurrogateInput, SurrogateOutput};

/// Reward signal fed to the policy gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeedbackMode {
    /// Outcome offsets only: +1 resolved, -0.5 unfinished, 0 otherwise.
    ExecutionOnly,
    /// Verifier score only.
    ScoreOnly,
    /// Outcome offset plus verifier score.
    Hybrid,
}

impl FeedbackMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackMode::ExecutionOnly => "execution-only",
            FeedbackMode::ScoreOnly => "score-only",
            FeedbackMode::Hybrid => "hybrid",
        }
    }

    pub fn reward(self, status: Status, score: f64) -> f64 {
        match self {
            FeedbackMode::ExecutionOnly => status.offset::<f64>(),
            FeedbackMode::ScoreOnly => score,
            FeedbackMode::Hybrid => hybrid_reward(HybridRewardInput { status, score_ef: score })
                .expect("scorer output lies in [0, 1]"),
        }
    }
}

/// Reward used by the plain REINFORCE step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardMode {
    /// r(tau), the verifier score.
    RmScore,
    /// c(tau), the correctness label.
    TrueLabel,
}

/// Flips the observed execution outcome with probability `flip`.
fn observe<R: Rng + ?Sized>(status: Status, flip: f64, rng: &mut R) -> Status {
    if flip <= 0.0 || rng.random::<f64>() >= flip {
        return status;
    }
    match status {
        Status::Resolved => Status::Failed,
        Status::Failed | Status::Unfinished => Status::Resolved,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub rollout: Rollout,
    pub draw: ScoredDraw,
    /// Execution outcome as observed (after label noise).
    pub observed: Status,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReinforceStep {
    pub gradient: Vec<f64>,
    pub samples: Vec<Sample>,
    pub mean_reward: f64,
}

/// Mean of `reward_i * grad log pi(a_i)` over a fixed batch.
pub fn reinforce_gradient<P: Policy>(policy: &P, samples: &[Sample]) -> Vec<f64> {
    let mut g = vec![0.0; policy.params().len()];
    if samples.is_empty() {
        return g;
    }
    let inv = 1.0 / samples.len() as f64;
    for s in samples {
        if s.reward == 0.0 {
            continue;
        }
        for (gi, di) in g.iter_mut().zip(policy.grad_log_prob(&s.rollout.tokens)) {
            *gi += inv * s.reward * di;
        }
    }
    g
}

pub(crate) fn score_rollouts<P: Policy, R: Rng + ?Sized>(
    policy: &P,
    scorer: &SyntheticScorer,
    n: usize,
    partial_credit: f64,
    rng: &mut R,
) -> Vec<(Rollout, ScoredDraw)> {
    (0..n)
        .map(|_| {
            let rollout = policy.rollout(rng);
            let draw = scorer.draw(rollout.correct, rollout.progress, partial_credit, rng);
            (rollout, draw)
        })
        .collect()
}

/// One REINFORCE update `theta += lr * mean(reward * grad log pi)`.
pub fn reinforce_step<R: Rng + ?Sized>(
    policy: &mut BanditPolicy,
    scorer: &SyntheticScorer,
    batch: usize,
    mode: RewardMode,
    lr: f64,
    rng: &mut R,
) -> Result<ReinforceStep, SimError> {
    if batch == 0 {
        return Err(SimError::Config("batch must be at least 1".into()));
    }
    let samples: Vec<Sample> = score_rollouts(policy, scorer, batch, 0.0, rng)
        .into_iter()
        .map(|(rollout, draw)| {
            let reward = match mode {
                RewardMode::RmScore => draw.score,
                RewardMode::TrueLabel => f64::from(u8::from(rollout.correct)),
            };
            Sample {
                observed: rollout.status,
                rollout,
                draw,
                reward,
            }
        })
        .collect();
    let gradient = reinforce_gradient(policy, &samples);
    for (t, g) in policy.params_mut().iter_mut().zip(&gradient) {
        *t += lr * g;
    }
    let mean_reward = samples.iter().map(|s| s.reward).sum::<f64>() / batch as f64;
    Ok(ReinforceStep {
        gradient,
        samples,
        mean_reward,
    })
}

/// Bandit step with a [`FeedbackMode`] reward, used by experiments.
pub(crate) fn bandit_feedback_step<R: Rng + ?Sized>(
    policy: &mut BanditPolicy,
    scorer: &SyntheticScorer,
    batch: usize,
    mode: FeedbackMode,
    lr: f64,
    label_flip: f64,
    rng: &mut R,
) -> ReinforceStep {
    let samples: Vec<Sample> = score_rollouts(policy, scorer, batch, 0.0, rng)
        .into_iter()
        .map(|(rollout, draw)| {
            let observed = observe(rollout.status, label_flip, rng);
            Sample {
                reward: mode.reward(observed, draw.score),
                observed,
                rollout,
                draw,
            }
        })
        .collect();
    let gradient = reinforce_gradient(policy, &samples);
    for (t, g) in policy.params_mut().iter_mut().zip(&gradient) {
        *t += lr * g;
    }
    let mean_reward = samples.iter().map(|s| s.reward).sum::<f64>() / batch.max(1) as f64;
    ReinforceStep {
        gradient,
        samples,
        mean_reward,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GspoConfig {
    pub group: usize,
    pub epsilon: f64,
    pub lr: f64,
    /// Gradient steps taken on each sampled group before `pi_old` is refreshed.
    pub inner_epochs: usize,
    pub mode: FeedbackMode,
    pub label_flip: f64,
    pub partial_credit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GspoStep {
    pub samples: Vec<Sample>,
    pub advantages: Vec<f64>,
    /// Surrogate evaluated right after the `pi_old` sync.
    pub first: SurrogateOutput<f64>,
    /// Norm of the first-epoch ascent direction.
    pub grad_norm: f64,
    /// Clipped fraction averaged over inner epochs.
    pub clipped_fraction: f64,
    pub mean_reward: f64,
    /// L2 norm of the total parameter change.
    pub update_norm: f64,
}

/// Gradient of the surrogate objective with respect to the policy logits,
/// given `d objective / d logp_new_i`.
pub fn surrogate_gradient<P: Policy>(policy: &P, rollouts: &[&[usize]], dlogp: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; policy.params().len()];
    for (tokens, &w) in rollouts.iter().zip(dlogp) {
        if w == 0.0 {
            continue;
        }
        for (gi, di) in g.iter_mut().zip(policy.grad_log_prob(tokens)) {
            *gi += w * di;
        }
    }
    g
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Samples a group from the current policy (which becomes `pi_old`), shapes
/// rewards, standardises them within the group and ascends the clipped
/// surrogate for `inner_epochs` steps.
pub fn gspo_step<R: Rng + ?Sized>(
    policy: &mut SequencePolicy,
    scorer: &SyntheticScorer,
    cfg: &GspoConfig,
    rng: &mut R,
) -> Result<GspoStep, SimError> {
    if cfg.group < 2 {
        return Err(SimError::Config(format!("group size must be at least 2, got {}", cfg.group)));
    }
    if cfg.epsilon.is_nan() || cfg.epsilon <= 0.0 {
        return Err(SimError::Config(format!("epsilon must be positive, got {}", cfg.epsilon)));
    }
    let samples: Vec<Sample> = score_rollouts(policy, scorer, cfg.group, cfg.partial_credit, rng)
        .into_iter()
        .map(|(rollout, draw)| {
            let observed = observe(rollout.status, cfg.label_flip, rng);
            Sample {
                reward: cfg.mode.reward(observed, draw.score),
                observed,
                rollout,
                draw,
            }
        })
        .collect();
    let rewards: Vec<f64> = samples.iter().map(|s| s.reward).collect();
    let advantages = group_advantage_of(&rewards)?;
    let tokens: Vec<&[usize]> = samples.iter().map(|s| s.rollout.tokens.as_slice()).collect();
    let logp_old: Vec<f64> = tokens.iter().map(|t| policy.log_prob(t)).collect();
    let lengths: Vec<usize> = tokens.iter().map(|t| policy.policy_len(t)).collect();
    let start = policy.params().to_vec();

    let mut first = None;
    let mut grad_norm = 0.0;
    let mut clipped = 0.0;
    let epochs = cfg.inner_epochs.max(1);
    for epoch in 0..epochs {
        let input = SurrogateInput {
            logp_new: tokens.iter().map(|t| policy.log_prob(t)).collect(),
            logp_old: logp_old.clone(),
            lengths: lengths.clone(),
            advantages: advantages.clone(),
            epsilon: cfg.epsilon,
        };
        let out = gspo_surrogate(&input)?;
        let g = surrogate_gradient(policy, &tokens, &out.dlogp);
        if epoch == 0 {
            grad_norm = norm(&g);
        }
        clipped += out.clipped_fraction();
        for (t, gi) in policy.params_mut().iter_mut().zip(&g) {
            *t += cfg.lr * gi;
        }
        if first.is_none() {
            first = Some(out);
        }
    }
    let delta: Vec<f64> = policy.params().iter().zip(&start).map(|(a, b)| a - b).collect();
    Ok(GspoStep {
        mean_reward: rewards.iter().sum::<f64>() / rewards.len() as f64,
        samples,
        advantages,
        first: first.expect("at least one epoch"),
        grad_norm,
        clipped_fraction: clipped / epochs as f64,
        update_norm: norm(&delta),
    })
}
