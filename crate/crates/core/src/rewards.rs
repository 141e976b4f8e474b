//! Reward mathematics: logit-to-score mapping, hybrid outcome shaping,
//! group-relative advantages and the sequence-level clipped surrogate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{mean, pairwise_sum, population_variance, sigmoid, Real};

#[derive(Debug, Error, PartialEq)]
pub enum RewardError {
    #[error("logits must be finite (got yes={yes}, no={no})")]
    NonFiniteLogit { yes: f64, no: f64 },
    #[error("verifier score {0} is outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("group needs at least 2 rewards, got {0}")]
    GroupTooSmall(usize),
    #[error("clip range epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("surrogate inputs have mismatched lengths: {0}")]
    LengthMismatch(String),
    #[error("sequence length at index {0} must be positive")]
    ZeroLength(usize),
}

/// Outcome of a trajectory as reported by the environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Resolved,
    Failed,
    Unfinished,
}

impl Status {
    pub fn is_resolved(self) -> bool {
        self == Status::Resolved
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Resolved => "resolved",
            Status::Failed => "failed",
            Status::Unfinished => "unfinished",
        }
    }

    /// Outcome offset added to the verifier score in the hybrid reward.
    pub fn offset<T: Real>(self) -> T {
        match self {
            Status::Resolved => T::one(),
            Status::Unfinished => T::lit(-0.5),
            Status::Failed => T::zero(),
        }
    }
}

impl std::str::FromStr for Status {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "resolved" => Ok(Status::Resolved),
            "failed" => Ok(Status::Failed),
            "unfinished" => Ok(Status::Unfinished),
            other => Err(format!(
                "invalid status '{other}' (expected resolved, failed or unfinished)"
            )),
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Verifier score from the YES/NO token logits, `exp(y) / (exp(y) + exp(n))`.
///
/// Evaluated as a logistic of the logit difference, so large logits never
/// overflow. Saturates to exactly 0 or 1 once the difference exceeds the
/// precision of `T`.
pub fn score_from_logits<T: Real>(logit_yes: T, logit_no: T) -> Result<T, RewardError> {
    if !logit_yes.is_finite() || !logit_no.is_finite() {
        return Err(RewardError::NonFiniteLogit {
            yes: logit_yes.to_f64().unwrap_or(f64::NAN),
            no: logit_no.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(sigmoid(logit_yes - logit_no))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridRewardInput<T> {
    pub status: Status,
    pub score_ef: T,
}

/// Outcome offset (+1 resolved, -0.5 unfinished, 0 otherwise) plus the
/// execution-free score.
pub fn hybrid_reward<T: Real>(input: HybridRewardInput<T>) -> Result<T, RewardError> {
    let s = input.score_ef;
    if !(s >= T::zero() && s <= T::one()) {
        return Err(RewardError::ScoreOutOfRange(s.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(input.status.offset::<T>() + s)
}

/// Rewards for the G rollouts sampled for a single query.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupRewards<T> {
    rewards: Vec<T>,
}

impl<T: Real> GroupRewards<T> {
    pub fn new(rewards: Vec<T>) -> Result<Self, RewardError> {
        if rewards.len() < 2 {
            return Err(RewardError::GroupTooSmall(rewards.len()));
        }
        Ok(Self { rewards })
    }

    pub fn rewards(&self) -> &[T] {
        &self.rewards
    }
}

/// Standard deviations below this are treated as a uniform group.
pub const DEGENERATE_STD: f64 = 1e-12;

/// Group-relative advantages `(r_i - mean) / std` with the population
/// standard deviation. A group with (numerically) constant rewards yields
/// all-zero advantages.
pub fn group_advantage<T: Real>(group: &GroupRewards<T>) -> Vec<T> {
    let r = group.rewards();
    let mu = mean(r).expect("group is non-empty");
    let sd = population_variance(r).expect("group is non-empty").sqrt();
    if sd < T::lit(DEGENERATE_STD) {
        return vec![T::zero(); r.len()];
    }
    r.iter().map(|&x| (x - mu) / sd).collect()
}

/// Convenience wrapper that validates the group size.
pub fn group_advantage_of<T: Real>(rewards: &[T]) -> Result<Vec<T>, RewardError> {
    Ok(group_advantage(&GroupRewards::new(rewards.to_vec())?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateInput<T> {
    pub logp_new: Vec<T>,
    pub logp_old: Vec<T>,
    /// Number of policy-generated (unmasked) tokens in each trajectory.
    pub lengths: Vec<usize>,
    pub advantages: Vec<T>,
    pub epsilon: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateOutput<T> {
    pub objective: T,
    /// Length-normalised importance ratio `s_i`.
    pub ratios: Vec<T>,
    /// True where the clipped branch is the one selected by the `min`.
    pub clipped: Vec<bool>,
    /// `d objective / d logp_new_i`.
    pub dlogp: Vec<T>,
}

impl<T: Real> SurrogateOutput<T> {
    pub fn clipped_fraction(&self) -> T {
        let n = self.clipped.iter().filter(|&&c| c).count();
        T::from_count(n) / T::from_count(self.clipped.len().max(1))
    }
}

/// Sequence-level clipped surrogate
/// `(1/G) sum_i min(s_i A_i, clip(s_i, 1-eps, 1+eps) A_i)` with
/// `s_i = exp((logp_new_i - logp_old_i) / |tau_i|)`.
pub fn gspo_surrogate<T: Real>(input: &SurrogateInput<T>) -> Result<SurrogateOutput<T>, RewardError> {
    let g = input.logp_new.len();
    if input.logp_old.len() != g || input.lengths.len() != g || input.advantages.len() != g {
        return Err(RewardError::LengthMismatch(format!(
            "logp_new={}, logp_old={}, lengths={}, advantages={}",
            g,
            input.logp_old.len(),
            input.lengths.len(),
            input.advantages.len()
        )));
    }
    if input.epsilon.is_nan() || input.epsilon <= T::zero() {
        return Err(RewardError::BadEpsilon(input.epsilon.to_f64().unwrap_or(f64::NAN)));
    }
    if let Some(i) = input.lengths.iter().position(|&l| l == 0) {
        return Err(RewardError::ZeroLength(i));
    }

    let lo = T::one() - input.epsilon;
    let hi = T::one() + input.epsilon;
    let inv_g = T::one() / T::from_count(g.max(1));
    let mut terms = Vec::with_capacity(g);
    let mut ratios = Vec::with_capacity(g);
    let mut clipped = Vec::with_capacity(g);
    let mut dlogp = Vec::with_capacity(g);
    for i in 0..g {
        let len = T::from_count(input.lengths[i]);
        let s = ((input.logp_new[i] - input.logp_old[i]) / len).exp();
        let a = input.advantages[i];
        let unclipped = s * a;
        let clipped_term = s.max(lo).min(hi) * a;
        // Clip branch is active only when it strictly lowers the term.
        let active = clipped_term < unclipped;
        let term = if active { clipped_term } else { unclipped };
        terms.push(term);
        ratios.push(s);
        clipped.push(active);
        dlogp.push(if active { T::zero() } else { inv_g * a * s / len });
    }
    Ok(SurrogateOutput {
        objective: pairwise_sum(&terms) * inv_g,
        ratios,
        clipped,
        dlogp,
    })
}
