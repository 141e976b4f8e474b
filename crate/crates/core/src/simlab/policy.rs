//! Toy softmax policies with closed-form score functions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::rewards::Status;

/// A sampled trajectory together with its environment outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub tokens: Vec<usize>,
    /// True correctness c(tau).
    pub correct: bool,
    pub status: Status,
    /// Fraction of policy tokens agreeing with the closest target, in `[0, 1]`.
    pub progress: f64,
}

/// Common interface for the simulator's policies.
pub trait Policy {
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    fn rollout<R: Rng + ?Sized>(&self, rng: &mut R) -> Rollout;
    /// Log-probability of the policy-generated tokens of `tokens`.
    fn log_prob(&self, tokens: &[usize]) -> f64;
    /// Gradient of [`Self::log_prob`] with respect to [`Self::params`].
    fn grad_log_prob(&self, tokens: &[usize]) -> Vec<f64>;
    /// Number of tokens that count towards the sequence length.
    fn policy_len(&self, tokens: &[usize]) -> usize;
    /// Exact probability that a rollout is correct.
    fn success_prob(&self) -> f64;
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

fn log_softmax_at(logits: &[f64], k: usize) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&l| (l - m).exp()).sum::<f64>().ln();
    logits[k] - lse
}

fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// K-armed bandit; arm `k` succeeds with probability `success[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditPolicy {
    pub logits: Vec<f64>,
    pub success: Vec<f64>,
}

impl BanditPolicy {
    pub fn new(logits: Vec<f64>, success: Vec<f64>) -> Result<Self, SimError> {
        if logits.is_empty() || logits.len() != success.len() {
            return Err(SimError::Config(format!(
                "bandit needs matching non-empty logits and success lists ({} vs {})",
                logits.len(),
                success.len()
            )));
        }
        if let Some(p) = success.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(SimError::Config(format!("arm success probability {p} outside [0, 1]")));
        }
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(SimError::Config("bandit logits must be finite".into()));
        }
        Ok(Self { logits, success })
    }

    pub fn uniform(success: Vec<f64>) -> Result<Self, SimError> {
        Self::new(vec![0.0; success.len()], success)
    }

    /// Four arms with spread-out success rates and a non-uniform start.
    pub fn reference() -> Self {
        Self::new(vec![0.4, -0.3, 0.2, -0.5], vec![0.15, 0.35, 0.6, 0.85]).expect("valid reference bandit")
    }

    pub fn probs(&self) -> Vec<f64> {
        softmax(&self.logits)
    }

    pub fn arms(&self) -> usize {
        self.logits.len()
    }
}

impl Policy for BanditPolicy {
    fn params(&self) -> &[f64] {
        &self.logits
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    fn rollout<R: Rng + ?Sized>(&self, rng: &mut R) -> Rollout {
        let arm = sample_categorical(&self.probs(), rng);
        let correct = rng.random::<f64>() < self.success[arm];
        Rollout {
            tokens: vec![arm],
            correct,
            status: if correct { Status::Resolved } else { Status::Failed },
            progress: 0.0,
        }
    }

    fn log_prob(&self, tokens: &[usize]) -> f64 {
        log_softmax_at(&self.logits, tokens[0])
    }

    /// `e_k - pi`.
    fn grad_log_prob(&self, tokens: &[usize]) -> Vec<f64> {
        let mut g: Vec<f64> = self.probs().into_iter().map(|p| -p).collect();
        g[tokens[0]] += 1.0;
        g
    }

    fn policy_len(&self, _tokens: &[usize]) -> usize {
        1
    }

    fn success_prob(&self) -> f64 {
        self.probs().iter().zip(&self.success).map(|(p, s)| p * s).sum()
    }
}

/// Fixed-horizon token policy with one logit row per position.
///
/// Positions listed in `tool_positions` hold environment (tool-response)
/// tokens drawn uniformly by the environment; they are excluded from the
/// log-probability, its gradient and the sequence length. A rollout is
/// correct when its policy tokens match some target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequencePolicy {
    pub vocab: usize,
    pub horizon: usize,
    /// Row-major `horizon x vocab`.
    pub logits: Vec<f64>,
    pub tool_positions: Vec<usize>,
    pub targets: Vec<Vec<usize>>,
    /// Emitting this token at the last policy position, when incorrect,
    /// marks the rollout unfinished.
    pub unfinished_token: Option<usize>,
}

impl SequencePolicy {
    pub fn new(
        vocab: usize,
        horizon: usize,
        tool_positions: Vec<usize>,
        targets: Vec<Vec<usize>>,
        unfinished_token: Option<usize>,
    ) -> Result<Self, SimError> {
        if vocab < 2 || horizon == 0 {
            return Err(SimError::Config("sequence policy needs vocab >= 2 and horizon >= 1".into()));
        }
        if let Some(&t) = tool_positions.iter().find(|&&t| t >= horizon) {
            return Err(SimError::Config(format!("tool position {t} outside horizon {horizon}")));
        }
        if tool_positions.len() >= horizon {
            return Err(SimError::Config("at least one position must be policy-generated".into()));
        }
        if targets.is_empty() {
            return Err(SimError::Config("sequence policy needs at least one target".into()));
        }
        for t in &targets {
            if t.len() != horizon || t.iter().any(|&x| x >= vocab) {
                return Err(SimError::Config(format!(
                    "target {t:?} must have length {horizon} with tokens < {vocab}"
                )));
            }
        }
        if unfinished_token.is_some_and(|u| u >= vocab) {
            return Err(SimError::Config("unfinished_token outside vocabulary".into()));
        }
        let mut tool_positions = tool_positions;
        tool_positions.sort_unstable();
        tool_positions.dedup();
        Ok(Self {
            vocab,
            horizon,
            logits: vec![0.0; vocab * horizon],
            tool_positions,
            targets,
            unfinished_token,
        })
    }

    pub fn is_tool(&self, t: usize) -> bool {
        self.tool_positions.binary_search(&t).is_ok()
    }

    fn action_positions(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.horizon).filter(|&t| !self.is_tool(t))
    }

    fn row(&self, t: usize) -> &[f64] {
        &self.logits[t * self.vocab..(t + 1) * self.vocab]
    }

    pub fn n_policy_tokens(&self) -> usize {
        self.horizon - self.tool_positions.len()
    }

    pub fn progress(&self, tokens: &[usize]) -> f64 {
        let n = self.n_policy_tokens() as f64;
        self.targets
            .iter()
            .map(|tg| self.action_positions().filter(|&t| tokens[t] == tg[t]).count() as f64 / n)
            .fold(0.0, f64::max)
    }

    pub fn is_correct(&self, tokens: &[usize]) -> bool {
        self.targets
            .iter()
            .any(|tg| self.action_positions().all(|t| tokens[t] == tg[t]))
    }

    pub fn status(&self, tokens: &[usize]) -> Status {
        if self.is_correct(tokens) {
            return Status::Resolved;
        }
        let last = self.action_positions().last().expect("has policy positions");
        match self.unfinished_token {
            Some(u) if tokens[last] == u => Status::Unfinished,
            _ => Status::Failed,
        }
    }
}

impl Policy for SequencePolicy {
    fn params(&self) -> &[f64] {
        &self.logits
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    fn rollout<R: Rng + ?Sized>(&self, rng: &mut R) -> Rollout {
        let tokens: Vec<usize> = (0..self.horizon)
            .map(|t| {
                if self.is_tool(t) {
                    rng.random_range(0..self.vocab)
                } else {
                    sample_categorical(&softmax(self.row(t)), rng)
                }
            })
            .collect();
        Rollout {
            correct: self.is_correct(&tokens),
            status: self.status(&tokens),
            progress: self.progress(&tokens),
            tokens,
        }
    }

    fn log_prob(&self, tokens: &[usize]) -> f64 {
        self.action_positions().map(|t| log_softmax_at(self.row(t), tokens[t])).sum()
    }

    fn grad_log_prob(&self, tokens: &[usize]) -> Vec<f64> {
        let mut g = vec![0.0; self.logits.len()];
        for t in self.action_positions() {
            let p = softmax(self.row(t));
            let base = t * self.vocab;
            for (v, pv) in p.iter().enumerate() {
                g[base + v] = -pv;
            }
            g[base + tokens[t]] += 1.0;
        }
        g
    }

    fn policy_len(&self, _tokens: &[usize]) -> usize {
        self.n_policy_tokens()
    }

    fn success_prob(&self) -> f64 {
        // Distinct policy-token patterns among the targets are disjoint events.
        let mut patterns: Vec<Vec<usize>> = self
            .targets
            .iter()
            .map(|tg| self.action_positions().map(|t| tg[t]).collect())
            .collect();
        patterns.sort();
        patterns.dedup();
        let probs: Vec<Vec<f64>> = self.action_positions().map(|t| softmax(self.row(t))).collect();
        patterns
            .iter()
            .map(|pat| pat.iter().zip(&probs).map(|(&x, p)| p[x]).product::<f64>())
            .sum()
    }
}

/// Either toy policy, as selected by an experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ToyPolicy {
    Bandit(BanditPolicy),
    Sequence(SequencePolicy),
}

impl ToyPolicy {
    pub fn params(&self) -> &[f64] {
        match self {
            ToyPolicy::Bandit(b) => b.params(),
            ToyPolicy::Sequence(s) => s.params(),
        }
    }

    pub fn success_prob(&self) -> f64 {
        match self {
            ToyPolicy::Bandit(b) => b.success_prob(),
            ToyPolicy::Sequence(s) => s.success_prob(),
        }
    }
}
