//! Synthetic reward models, toy policies and the training loops and
//! estimators used to check how verifier quality shapes policy gradients.

pub mod estimators;
pub mod experiment;
pub mod policy;
pub mod scorer;
pub mod train;
pub mod verify;

use thiserror::Error;

use crate::metrics::MetricsError;
use crate::rewards::RewardError;

pub use estimators::{
    estimate_bias, reversed_pair_count, reversed_pair_rate, tts_decomposition_check, variance_decomposition, BiasEstimate,
    ReversedPairs, TtsDecomposition, VarianceDecomposition,
};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentRun, Snapshot, TraceRow, TrainingTrace};
pub use policy::{BanditPolicy, Policy, Rollout, SequencePolicy, ToyPolicy};
pub use scorer::{sample_scored, split, ScoredDraw, SyntheticScorer};
pub use train::{gspo_step, reinforce_step, FeedbackMode, GspoConfig, GspoStep, ReinforceStep, RewardMode};
pub use verify::{run_suite, CheckResult, Suite, VerifyOptions};

/// Random generator used throughout the simulator.
pub type SimRng = rand_chacha::ChaCha8Rng;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
