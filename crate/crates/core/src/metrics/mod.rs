//! Verifier-quality metrics: best-of-k selection (RM@k), ranking quality
//! (AUC) and calibration (ECE), plus pass@k and score-separation summaries.

mod auc;
mod calibration;
mod selection;
mod separation;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use auc::auc;
pub use auc::doubled_wins;
pub use calibration::{ece, ece_with, BinStats, Binning, Calibration, DEFAULT_BINS};
pub use selection::{
    expected_selection, pass_at_k, pass_at_k_single, resolve_rate, rm_at_k, select_best, substream, PassAtK, RmAtK, RmAtKOptions,
};
pub use separation::{separation_report, Separation, DEFAULT_HIST_BINS};

use crate::scalar::Real;
use crate::trajdata::Dataset;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("scores and labels differ in length ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("AUC needs at least one positive and one negative label")]
    SingleClass,
    #[error("empty input")]
    EmptyInput,
    #[error("scores must not be NaN")]
    NonFinite,
    #[error("score {0} is outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("number of bins must be at least 1")]
    BadBins,
    #[error("k must be positive")]
    BadK,
    #[error("number of repetitions must be positive")]
    BadReps,
    #[error("empty subset")]
    EmptySubset,
    #[error("instance {instance_id} has no run {run_id}")]
    UnknownRun { instance_id: String, run_id: u64 },
    #[error("instance {instance_id} has {available} runs, fewer than k = {k} (enable ragged mode to allow)")]
    NotEnoughRuns {
        instance_id: String,
        available: usize,
        k: usize,
    },
}

pub(crate) fn check_pair<T>(scores: &[T], labels: &[bool]) -> Result<(), MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub ks: Vec<usize>,
    pub rm: RmAtKOptions,
    pub bins: usize,
    pub binning: Binning,
    pub hist_bins: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            ks: vec![1, 2, 4, 8, 16, 32],
            rm: RmAtKOptions::default(),
            bins: DEFAULT_BINS,
            binning: Binning::EqualWidth,
            hist_bins: DEFAULT_HIST_BINS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport<T> {
    /// `None` when the dataset has only one class.
    pub auc: Option<T>,
    pub ece: T,
    pub bins: Vec<BinStats<T>>,
    pub rm_at_k: Vec<RmAtK<T>>,
    pub pass_at_k: Vec<PassAtK<T>>,
    pub resolve_rate: T,
    pub n_instances: usize,
    /// Smallest run count over instances.
    pub n_runs_per_instance: usize,
    pub n_records: usize,
    pub separation: Separation<T>,
}

/// Computes every metric on a dataset.
pub fn evaluate<T: Real>(dataset: &Dataset<T>, opts: &EvalOptions) -> Result<MetricsReport<T>, MetricsError> {
    let (scores, labels) = dataset.scores_and_labels();
    let auc = match auc(&scores, &labels) {
        Ok(a) => Some(a),
        Err(MetricsError::SingleClass) => None,
        Err(e) => return Err(e),
    };
    let cal = ece_with(&scores, &labels, opts.bins, opts.binning)?;
    let mut rm = Vec::with_capacity(opts.ks.len());
    let mut pass = Vec::with_capacity(opts.ks.len());
    for &k in &opts.ks {
        rm.push(rm_at_k(dataset, k, &opts.rm)?);
        pass.push(pass_at_k(dataset, k, opts.rm.ragged)?);
    }
    Ok(MetricsReport {
        auc,
        ece: cal.ece,
        bins: cal.bins,
        rm_at_k: rm,
        pass_at_k: pass,
        resolve_rate: resolve_rate(dataset),
        n_instances: dataset.instances.len(),
        n_runs_per_instance: dataset.min_runs(),
        n_records: dataset.n_records(),
        separation: separation_report(&scores, &labels, opts.hist_bins)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewards::Status;
    use crate::trajdata::TrajectoryRecord;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn random_dataset(cells: &[(u8, bool)], n_inst: usize, runs: usize) -> Dataset<f64> {
        let mut recs = Vec::new();
        for i in 0..n_inst {
            for r in 0..runs {
                let (s, ok) = cells[(i * runs + r) % cells.len()];
                recs.push(TrajectoryRecord::new(
                    format!("i{i}"),
                    r as u64,
                    s as f64 / 255.0,
                    if ok { Status::Resolved } else { Status::Failed },
                ));
            }
        }
        Dataset::from_records(recs, BTreeMap::new()).unwrap()
    }

    #[test]
    fn report_invariants() {
        let cells: Vec<(u8, bool)> = (0..64u32).map(|i| ((i * 97 % 256) as u8, i % 3 == 0)).collect();
        let ds = random_dataset(&cells, 10, 8);
        let opts = EvalOptions {
            ks: vec![1, 2, 4, 8],
            ..Default::default()
        };
        let r = evaluate(&ds, &opts).unwrap();
        let recomputed: f64 = r.bins.iter().map(|b| b.count as f64 / r.n_records as f64 * b.gap()).sum();
        assert!((r.ece - recomputed).abs() < 1e-12);
        for (rm, pass) in r.rm_at_k.iter().zip(&r.pass_at_k) {
            assert!(rm.mean <= rm.same_draw_pass);
            assert!(rm.expected <= pass.rate + 1e-12);
        }
        assert_eq!((r.n_instances, r.n_runs_per_instance, r.n_records), (10, 8, 80));
    }

    proptest! {
        #[test]
        fn rm_never_beats_pass(cells in proptest::collection::vec((any::<u8>(), any::<bool>()), 1..64), seed in any::<u64>()) {
            let ds = random_dataset(&cells, 6, 8);
            for k in [1, 2, 3, 8] {
                let rm = rm_at_k(&ds, k, &RmAtKOptions { reps: 5, seed, ragged: false }).unwrap();
                let pass = pass_at_k(&ds, k, false).unwrap();
                prop_assert!(rm.mean <= rm.same_draw_pass);
                prop_assert!(rm.expected <= pass.rate + 1e-12);
            }
            let full = rm_at_k(&ds, 8, &RmAtKOptions { reps: 5, seed, ragged: false }).unwrap();
            prop_assert!(full.mean <= pass_at_k(&ds, 8, false).unwrap().rate);
            prop_assert!((full.mean - full.expected).abs() < 1e-12);
        }
    }
}
