use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{SimError, SimRng};
use crate::scalar::{logit, sigmoid};
use rand::SeedableRng;

/// Reward-model surrogate over an equal-variance Gaussian latent.
///
/// A resolved trajectory has latent `z ~ N(+d/2, 1)`, an unresolved one
/// `z ~ N(-d/2, 1)`; the emitted score is `sigmoid(a z + b)`. The ranking
/// depends on `d` alone, calibration on how `(a, b)` compare with the Bayes
/// posterior `sigmoid(d z + logit p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScorer {
    pub d: f64,
    pub a: f64,
    pub b: f64,
    pub p: f64,
}

/// One scored draw: latent, emitted score and true label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredDraw {
    pub z: f64,
    pub score: f64,
    pub label: bool,
}

impl SyntheticScorer {
    pub fn new(d: f64, a: f64, b: f64, p: f64) -> Result<Self, SimError> {
        if !(d.is_finite() && d >= 0.0) {
            return Err(SimError::Config(format!("scorer.d must be finite and >= 0, got {d}")));
        }
        if !(a.is_finite() && a > 0.0) {
            return Err(SimError::Config(format!("scorer.a must be finite and > 0, got {a}")));
        }
        if !b.is_finite() {
            return Err(SimError::Config(format!("scorer.b must be finite, got {b}")));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(SimError::Config(format!("scorer.p must lie in (0, 1), got {p}")));
        }
        Ok(Self { d, a, b, p })
    }

    /// The Bayes-posterior scorer for separation `d` and base rate `p`.
    pub fn calibrated(d: f64, p: f64) -> Result<Self, SimError> {
        Self::new(d, d, logit(p), p)
    }

    /// Same ranking as [`Self::calibrated`] with the logit slope scaled by `factor`.
    pub fn distorted(d: f64, p: f64, factor: f64) -> Result<Self, SimError> {
        Self::new(d, factor * d, logit(p), p)
    }

    pub fn true_auc(&self) -> f64 {
        Normal::new(0.0, 1.0).expect("unit normal").cdf(self.d / std::f64::consts::SQRT_2)
    }

    pub fn is_calibrated(&self) -> bool {
        (self.a - self.d).abs() < 1e-12 && (self.b - logit(self.p)).abs() < 1e-12
    }

    pub fn latent_mean(&self, label: bool) -> f64 {
        if label {
            self.d / 2.0
        } else {
            -self.d / 2.0
        }
    }

    pub fn score_of_latent(&self, z: f64) -> f64 {
        sigmoid(self.a * z + self.b)
    }

    /// `E[c | r]` in closed form.
    pub fn posterior(&self, score: f64) -> f64 {
        if self.d == 0.0 {
            return self.p;
        }
        sigmoid(self.d * (logit(score) - self.b) / self.a + logit(self.p))
    }

    /// `E[c | r]` evaluated from the latent that produced `r`. Same function
    /// as [`Self::posterior`], without the round trip through `logit(r)`.
    pub fn posterior_of_latent(&self, z: f64) -> f64 {
        sigmoid(self.d * z + logit(self.p))
    }

    /// Calibration bias `b(alpha) = E[c | r = alpha] - alpha`.
    pub fn calibration_bias(&self, alpha: f64) -> f64 {
        self.posterior(alpha) - alpha
    }

    /// Scores a trajectory with known label. `progress` in `[0, 1]` raises
    /// the latent mean of unresolved trajectories by `partial_credit * d *
    /// progress`; use 0 for the plain two-Gaussian model.
    pub fn draw<R: Rng + ?Sized>(&self, label: bool, progress: f64, partial_credit: f64, rng: &mut R) -> ScoredDraw {
        let noise: f64 = rng.sample(StandardNormal);
        let shift = if label { 0.0 } else { partial_credit * self.d * progress };
        let z = self.latent_mean(label) + shift + noise;
        ScoredDraw {
            z,
            score: self.score_of_latent(z),
            label,
        }
    }
}

/// `n` draws with `c ~ Bernoulli(p)`.
pub fn sample_scored(scorer: &SyntheticScorer, n: usize, seed: u64) -> Vec<ScoredDraw> {
    let mut rng = SimRng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let label = rng.random::<f64>() < scorer.p;
            scorer.draw(label, 0.0, 0.0, &mut rng)
        })
        .collect()
}

/// Splits draws into the `(scores, labels)` pair the metrics take.
pub fn split(draws: &[ScoredDraw]) -> (Vec<f64>, Vec<bool>) {
    draws.iter().map(|d| (d.score, d.label)).unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calibrated_posterior_is_identity() {
        let s = SyntheticScorer::calibrated(2.0, 0.3).unwrap();
        assert!(s.is_calibrated());
        for i in 1..100 {
            let r = i as f64 / 100.0;
            assert!(s.calibration_bias(r).abs() < 1e-12);
        }
        for z in [-3.0, -0.5, 0.0, 1.7] {
            assert_eq!(s.posterior_of_latent(z), s.score_of_latent(z));
        }
    }

    #[test]
    fn posterior_routes_agree() {
        let s = SyntheticScorer::distorted(1.5, 0.4, 3.0).unwrap();
        for z in [-2.0, -0.3, 0.0, 0.8, 2.5] {
            let r = s.score_of_latent(z);
            assert!((s.posterior(r) - s.posterior_of_latent(z)).abs() < 1e-12);
        }
        assert!(!s.is_calibrated());
        // Overconfident: high scores are too high, low scores too low.
        assert!(s.calibration_bias(0.95) < 0.0 && s.calibration_bias(0.05) > 0.0);
    }

    #[test]
    fn true_auc_values() {
        assert!((SyntheticScorer::calibrated(2.0, 0.5).unwrap().true_auc() - 0.921_350_396).abs() < 1e-8);
        assert_eq!(SyntheticScorer::new(0.0, 1.0, 0.0, 0.5).unwrap().true_auc(), 0.5);
    }

    #[test]
    fn validation() {
        assert!(SyntheticScorer::new(-1.0, 1.0, 0.0, 0.5).is_err());
        assert!(SyntheticScorer::new(1.0, 0.0, 0.0, 0.5).is_err());
        assert!(SyntheticScorer::new(1.0, 1.0, f64::NAN, 0.5).is_err());
        assert!(SyntheticScorer::new(1.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn sampling_is_seeded() {
        let s = SyntheticScorer::calibrated(1.0, 0.5).unwrap();
        assert_eq!(sample_scored(&s, 50, 3), sample_scored(&s, 50, 3));
        assert_ne!(sample_scored(&s, 50, 3), sample_scored(&s, 50, 4));
    }
}
