//! Config-driven training runs producing per-step traces and snapshots.

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::policy::{BanditPolicy, Policy, SequencePolicy, ToyPolicy};
use super::scorer::{ScoredDraw, SyntheticScorer};
use super::train::{bandit_feedback_step, gspo_step, score_rollouts, FeedbackMode, GspoConfig, Sample};
use super::{SimError, SimRng};
use crate::fmt::sig;
use crate::metrics::{auc, ece, MetricsError, DEFAULT_BINS};
use crate::scalar::logit;

fn default_p() -> f64 {
    0.5
}

fn default_group() -> usize {
    8
}

fn default_one() -> usize {
    1
}

fn default_batch() -> usize {
    16
}

fn default_eval() -> usize {
    256
}

fn default_trace() -> String {
    "trace.csv".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerConfig {
    pub d: f64,
    /// Logit slope; defaults to `d` (calibrated).
    pub a: Option<f64>,
    /// Logit intercept; defaults to `logit(p)`.
    pub b: Option<f64>,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub label_flip: f64,
    #[serde(default)]
    pub partial_credit: f64,
}

impl ScorerConfig {
    pub fn scorer(&self) -> Result<SyntheticScorer, SimError> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(SimError::Config(format!("scorer.p must lie in (0, 1), got {}", self.p)));
        }
        if !(0.0..=1.0).contains(&self.label_flip) {
            return Err(SimError::Config(format!("scorer.label_flip must lie in [0, 1], got {}", self.label_flip)));
        }
        if !(self.partial_credit.is_finite() && self.partial_credit >= 0.0) {
            return Err(SimError::Config(format!(
                "scorer.partial_credit must be finite and >= 0, got {}",
                self.partial_credit
            )));
        }
        SyntheticScorer::new(self.d, self.a.unwrap_or(self.d), self.b.unwrap_or_else(|| logit(self.p)), self.p)
    }
}

/// Partial scorer table applied on top of the base `[scorer]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerOverride {
    pub d: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub p: Option<f64>,
    pub label_flip: Option<f64>,
    pub partial_credit: Option<f64>,
}

impl ScorerOverride {
    fn apply(&self, base: &ScorerConfig) -> ScorerConfig {
        ScorerConfig {
            d: self.d.unwrap_or(base.d),
            a: self.a.or(base.a),
            b: self.b.or(base.b),
            p: self.p.unwrap_or(base.p),
            label_flip: self.label_flip.unwrap_or(base.label_flip),
            partial_credit: self.partial_credit.unwrap_or(base.partial_credit),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Bandit,
    Sequence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Bandit: per-arm success probabilities.
    pub arms: Option<Vec<f64>>,
    pub vocab: Option<usize>,
    pub horizon: Option<usize>,
    #[serde(default)]
    pub tool_positions: Vec<usize>,
    pub targets: Option<Vec<Vec<usize>>>,
    pub unfinished_token: Option<usize>,
    /// Initial logits (row-major for sequences); zeros when absent.
    pub init: Option<Vec<f64>>,
}

impl PolicyConfig {
    pub fn build(&self) -> Result<ToyPolicy, SimError> {
        let missing = |f: &str| SimError::Config(format!("policy.{f} is required for kind = {:?}", self.kind));
        let mut policy = match self.kind {
            PolicyKind::Bandit => {
                let arms = self.arms.clone().ok_or_else(|| missing("arms"))?;
                ToyPolicy::Bandit(BanditPolicy::uniform(arms)?)
            }
            PolicyKind::Sequence => ToyPolicy::Sequence(SequencePolicy::new(
                self.vocab.ok_or_else(|| missing("vocab"))?,
                self.horizon.ok_or_else(|| missing("horizon"))?,
                self.tool_positions.clone(),
                self.targets.clone().ok_or_else(|| missing("targets"))?,
                self.unfinished_token,
            )?),
        };
        if let Some(init) = &self.init {
            let params = match &mut policy {
                ToyPolicy::Bandit(b) => b.params_mut(),
                ToyPolicy::Sequence(s) => s.params_mut(),
            };
            if init.len() != params.len() {
                return Err(SimError::Config(format!(
                    "policy.init has {} values, expected {}",
                    init.len(),
                    params.len()
                )));
            }
            if init.iter().any(|x| !x.is_finite()) {
                return Err(SimError::Config("policy.init must be finite".into()));
            }
            params.copy_from_slice(init);
        }
        Ok(policy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub mode: FeedbackMode,
    pub steps: usize,
    pub lr: f64,
    /// GSPO group size.
    #[serde(default = "default_group")]
    pub group: usize,
    /// GSPO clip range; required for sequence policies.
    pub epsilon: Option<f64>,
    #[serde(default = "default_one")]
    pub inner_epochs: usize,
    /// REINFORCE batch size for bandits.
    #[serde(default = "default_batch")]
    pub batch: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_trace")]
    pub trace: String,
    /// Snapshot cadence in steps; 0 keeps only the initial and final ones.
    #[serde(default)]
    pub snapshot_every: usize,
    /// Rollouts scored per snapshot.
    #[serde(default = "default_eval")]
    pub eval_samples: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            trace: default_trace(),
            snapshot_every: 0,
            eval_samples: default_eval(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantConfig {
    pub name: String,
    pub mode: Option<FeedbackMode>,
    pub scorer: Option<ScorerOverride>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scorer: ScorerConfig,
    pub policy: PolicyConfig,
    pub training: TrainingConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, rename = "variant")]
    pub variants: Vec<VariantConfig>,
}

/// A fully resolved single run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedVariant {
    pub name: String,
    pub mode: FeedbackMode,
    pub scorer_config: ScorerConfig,
    pub scorer: SyntheticScorer,
}

impl ExperimentConfig {
    pub fn from_toml(s: &str) -> Result<Self, SimError> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.policy.build()?;
        for v in self.resolved()? {
            v.scorer_config.scorer()?;
        }
        let t = &self.training;
        if !(t.lr.is_finite() && t.lr > 0.0) {
            return Err(SimError::Config(format!("training.lr must be positive, got {}", t.lr)));
        }
        match self.policy.kind {
            PolicyKind::Sequence => {
                if t.group < 2 {
                    return Err(SimError::Config(format!("training.group must be at least 2, got {}", t.group)));
                }
                match t.epsilon {
                    Some(e) if e > 0.0 && e.is_finite() => {}
                    Some(e) => return Err(SimError::Config(format!("training.epsilon must be positive, got {e}"))),
                    None => return Err(SimError::Config("training.epsilon is required for kind = sequence".into())),
                }
                if t.inner_epochs == 0 {
                    return Err(SimError::Config("training.inner_epochs must be at least 1".into()));
                }
            }
            PolicyKind::Bandit => {
                if t.batch == 0 {
                    return Err(SimError::Config("training.batch must be at least 1".into()));
                }
            }
        }
        Ok(())
    }

    /// One entry per `[[variant]]`, or the base run when none are given.
    pub fn resolved(&self) -> Result<Vec<ResolvedVariant>, SimError> {
        let make = |name: String, mode: FeedbackMode, sc: ScorerConfig| -> Result<ResolvedVariant, SimError> {
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return Err(SimError::Config(format!(
                    "variant.name {name:?} must be non-empty and use only [A-Za-z0-9_-]"
                )));
            }
            Ok(ResolvedVariant {
                scorer: sc.scorer()?,
                name,
                mode,
                scorer_config: sc,
            })
        };
        if self.variants.is_empty() {
            return Ok(vec![make(
                self.training.mode.as_str().to_string(),
                self.training.mode,
                self.scorer.clone(),
            )?]);
        }
        let mut out = Vec::with_capacity(self.variants.len());
        for v in &self.variants {
            let sc = v.scorer.as_ref().map_or_else(|| self.scorer.clone(), |o| o.apply(&self.scorer));
            if out.iter().any(|r: &ResolvedVariant| r.name == v.name) {
                return Err(SimError::Config(format!("duplicate variant name {:?}", v.name)));
            }
            out.push(make(v.name.clone(), v.mode.unwrap_or(self.training.mode), sc)?);
        }
        Ok(out)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.training.seed = seed;
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub mean_reward: f64,
    /// Exact success probability after the update.
    pub success_prob: f64,
    pub grad_norm: f64,
    pub clipped_fraction: f64,
    /// Norm of the batch estimate of `E[grad log pi (r - E[c|r])]`.
    pub bias_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub rows: Vec<TraceRow>,
}

pub const TRACE_HEADER: &str = "step,mean_reward,success_prob,grad_norm,clipped_fraction,bias_norm";

impl TrainingTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(TRACE_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.step,
                sig(r.mean_reward),
                sig(r.success_prob),
                sig(r.grad_norm),
                sig(r.clipped_fraction),
                sig(r.bias_norm)
            ));
        }
        s
    }

    /// First step whose success probability reaches `threshold`.
    pub fn first_step_reaching(&self, threshold: f64) -> Option<usize> {
        self.rows.iter().find(|r| r.success_prob >= threshold).map(|r| r.step)
    }

    pub fn final_success(&self) -> Option<f64> {
        self.rows.last().map(|r| r.success_prob)
    }
}

/// Policy state plus metrics of the scorer on the policy's own rollouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: usize,
    pub success_prob: f64,
    /// Fraction of evaluation rollouts that are correct.
    pub eval_resolve_rate: f64,
    /// `None` when the evaluation rollouts have only one class.
    pub eval_auc: Option<f64>,
    pub eval_ece: f64,
    pub policy: ToyPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRun {
    pub name: String,
    pub mode: FeedbackMode,
    pub scorer: SyntheticScorer,
    pub trace: TrainingTrace,
    pub snapshots: Vec<Snapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRun {
    pub seed: u64,
    pub variants: Vec<VariantRun>,
}

impl ExperimentRun {
    pub fn variant(&self, name: &str) -> Option<&VariantRun> {
        self.variants.iter().find(|v| v.name == name)
    }

    /// Long-format CSV of every variant: `variant,<trace columns>`.
    pub fn combined_csv(&self) -> String {
        let mut s = format!("variant,{TRACE_HEADER}\n");
        for v in &self.variants {
            for line in v.trace.to_csv().lines().skip(1) {
                s.push_str(&v.name);
                s.push(',');
                s.push_str(line);
                s.push('\n');
            }
        }
        s
    }
}

fn batch_bias_norm(scorer: &SyntheticScorer, policy: &impl Policy, samples: &[Sample]) -> f64 {
    let dim = policy.params().len();
    let mut acc = vec![0.0; dim];
    let inv = 1.0 / samples.len().max(1) as f64;
    for s in samples {
        let w = s.draw.score - scorer.posterior_of_latent(s.draw.z);
        for (a, g) in acc.iter_mut().zip(policy.grad_log_prob(&s.rollout.tokens)) {
            *a += inv * w * g;
        }
    }
    acc.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn snapshot<P: Policy>(
    step: usize,
    policy: &P,
    wrap: ToyPolicy,
    scorer: &SyntheticScorer,
    partial_credit: f64,
    n: usize,
    rng: &mut SimRng,
) -> Result<Snapshot, SimError> {
    let draws: Vec<ScoredDraw> = score_rollouts(policy, scorer, n, partial_credit, rng)
        .into_iter()
        .map(|(_, d)| d)
        .collect();
    let scores: Vec<f64> = draws.iter().map(|d| d.score).collect();
    let labels: Vec<bool> = draws.iter().map(|d| d.label).collect();
    let eval_auc = match auc(&scores, &labels) {
        Ok(a) => Some(a),
        Err(MetricsError::SingleClass | MetricsError::EmptyInput) => None,
        Err(e) => return Err(e.into()),
    };
    let eval_ece = if draws.is_empty() { 0.0 } else { ece(&scores, &labels, DEFAULT_BINS)?.ece };
    Ok(Snapshot {
        step,
        success_prob: policy.success_prob(),
        eval_resolve_rate: labels.iter().filter(|&&l| l).count() as f64 / n.max(1) as f64,
        eval_auc,
        eval_ece,
        policy: wrap,
    })
}

fn due(step: usize, every: usize, last: usize) -> bool {
    step == 0 || step == last || (every > 0 && step.is_multiple_of(every))
}

fn run_variant(cfg: &ExperimentConfig, v: &ResolvedVariant) -> Result<VariantRun, SimError> {
    let t = &cfg.training;
    let mut rng = SimRng::seed_from_u64(t.seed);
    let mut eval_rng = SimRng::seed_from_u64(t.seed);
    eval_rng.set_stream(2);
    let pc = v.scorer_config.partial_credit;
    let flip = v.scorer_config.label_flip;
    let every = cfg.output.snapshot_every;
    let n_eval = cfg.output.eval_samples;
    let mut rows = Vec::with_capacity(t.steps);
    let mut snaps = Vec::new();
    match cfg.policy.build()? {
        ToyPolicy::Bandit(mut p) => {
            snaps.push(snapshot(0, &p, ToyPolicy::Bandit(p.clone()), &v.scorer, 0.0, n_eval, &mut eval_rng)?);
            for step in 1..=t.steps {
                let before = p.clone();
                let st = bandit_feedback_step(&mut p, &v.scorer, t.batch, v.mode, t.lr, flip, &mut rng);
                rows.push(TraceRow {
                    step,
                    mean_reward: st.mean_reward,
                    success_prob: p.success_prob(),
                    grad_norm: st.gradient.iter().map(|x| x * x).sum::<f64>().sqrt(),
                    clipped_fraction: 0.0,
                    bias_norm: batch_bias_norm(&v.scorer, &before, &st.samples),
                });
                if due(step, every, t.steps) {
                    snaps.push(snapshot(step, &p, ToyPolicy::Bandit(p.clone()), &v.scorer, 0.0, n_eval, &mut eval_rng)?);
                }
            }
        }
        ToyPolicy::Sequence(mut p) => {
            let gc = GspoConfig {
                group: t.group,
                epsilon: t.epsilon.expect("validated"),
                lr: t.lr,
                inner_epochs: t.inner_epochs,
                mode: v.mode,
                label_flip: flip,
                partial_credit: pc,
            };
            snaps.push(snapshot(0, &p, ToyPolicy::Sequence(p.clone()), &v.scorer, pc, n_eval, &mut eval_rng)?);
            for step in 1..=t.steps {
                let before = p.clone();
                let st = gspo_step(&mut p, &v.scorer, &gc, &mut rng)?;
                rows.push(TraceRow {
                    step,
                    mean_reward: st.mean_reward,
                    success_prob: p.success_prob(),
                    grad_norm: st.grad_norm,
                    clipped_fraction: st.clipped_fraction,
                    bias_norm: batch_bias_norm(&v.scorer, &before, &st.samples),
                });
                if due(step, every, t.steps) {
                    snaps.push(snapshot(step, &p, ToyPolicy::Sequence(p.clone()), &v.scorer, pc, n_eval, &mut eval_rng)?);
                }
            }
        }
    }
    Ok(VariantRun {
        name: v.name.clone(),
        mode: v.mode,
        scorer: v.scorer,
        trace: TrainingTrace { rows },
        snapshots: snaps,
    })
}

/// Runs every variant of `cfg` from the same seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRun, SimError> {
    cfg.validate()?;
    let variants = cfg
        .resolved()?
        .iter()
        .map(|v| run_variant(cfg, v))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ExperimentRun {
        seed: cfg.training.seed,
        variants,
    })
}
