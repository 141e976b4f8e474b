//! Best-of-k selection: RM@k under the subsampling protocol and the
//! pass@k upper bound.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::MetricsError;
use crate::scalar::{mean, population_variance, Real};
use crate::trajdata::{Dataset, InstanceRuns};

/// Highest-scored run among `subset`; ties go to the lowest `run_id`.
pub fn select_best<T: Real>(instance: &InstanceRuns<T>, subset: &[u64]) -> Result<u64, MetricsError> {
    let mut best: Option<(u64, T)> = None;
    for &id in subset {
        let rec = instance.get(id).ok_or_else(|| MetricsError::UnknownRun {
            instance_id: instance.instance_id.clone(),
            run_id: id,
        })?;
        best = match best {
            None => Some((id, rec.score)),
            Some((bid, bs)) if rec.score > bs || (rec.score == bs && id < bid) => Some((id, rec.score)),
            keep => keep,
        };
    }
    best.map(|(id, _)| id).ok_or(MetricsError::EmptySubset)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RmAtKOptions {
    /// Repetitions of the random subsampling (ignored for full-k evaluation).
    pub reps: usize,
    pub seed: u64,
    /// Allow instances with fewer than k runs; they use all their runs.
    pub ragged: bool,
}

impl Default for RmAtKOptions {
    fn default() -> Self {
        Self {
            reps: 5,
            seed: 0,
            ragged: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmAtK<T> {
    pub k: usize,
    pub mean: T,
    /// Population variance over repetitions.
    pub variance: T,
    /// Number of repetitions actually evaluated (1 when k covers every run).
    pub reps: usize,
    /// Fraction of instances whose drawn subset holds any resolved run,
    /// averaged over the same repetitions. Bounds `mean` draw by draw.
    pub same_draw_pass: T,
    /// Exact expectation of the selected run's resolve rate over all
    /// k-subsets; the quantity the subsampled `mean` estimates.
    pub expected: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassAtK<T> {
    pub k: usize,
    pub rate: T,
}

fn effective_k<T: Real>(inst: &InstanceRuns<T>, k: usize, ragged: bool) -> Result<usize, MetricsError> {
    if inst.len() >= k {
        Ok(k)
    } else if ragged {
        Ok(inst.len())
    } else {
        Err(MetricsError::NotEnoughRuns {
            instance_id: inst.instance_id.clone(),
            available: inst.len(),
            k,
        })
    }
}

/// Independent RNG stream for one (seed, repetition, instance) triple, so
/// results do not depend on evaluation order.
pub fn substream(seed: u64, rep: u64, key: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(b"rmlab.rm_at_k");
    h.update(seed.to_le_bytes());
    h.update(rep.to_le_bytes());
    h.update(key.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

fn check_k<T: Real>(dataset: &Dataset<T>, k: usize) -> Result<(), MetricsError> {
    if k == 0 {
        return Err(MetricsError::BadK);
    }
    if dataset.instances.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(())
}

/// Resolve rate of the argmax-scored run among `k` runs drawn uniformly
/// without replacement per instance, averaged over `reps` repetitions.
///
/// When every instance has exactly `k` usable runs the selection is
/// deterministic and evaluated once.
pub fn rm_at_k<T: Real>(dataset: &Dataset<T>, k: usize, opts: &RmAtKOptions) -> Result<RmAtK<T>, MetricsError> {
    check_k(dataset, k)?;
    if opts.reps == 0 {
        return Err(MetricsError::BadReps);
    }
    let ks = dataset
        .instances
        .iter()
        .map(|inst| effective_k(inst, k, opts.ragged))
        .collect::<Result<Vec<_>, _>>()?;
    let ragged_hits = dataset.instances.iter().zip(&ks).filter(|(i, &k_eff)| k_eff < k && i.len() == k_eff).count();
    if ragged_hits > 0 {
        log::warn!("rm@{k}: {ragged_hits} instance(s) have fewer than {k} runs; using all of their runs");
    }

    let n_inst = T::from_count(dataset.instances.len());
    let per_expected: Vec<T> = dataset
        .instances
        .iter()
        .zip(&ks)
        .map(|(inst, &k_eff)| expected_selection(inst, k_eff))
        .collect();
    let expected = mean(&per_expected).expect("non-empty");
    let full = dataset.instances.iter().zip(&ks).all(|(i, &k_eff)| i.len() == k_eff);
    if full {
        let mut resolved = 0usize;
        let mut any = 0usize;
        for inst in &dataset.instances {
            let ids: Vec<u64> = inst.runs.iter().map(|r| r.run_id).collect();
            let best = select_best(inst, &ids)?;
            resolved += usize::from(inst.get(best).is_some_and(|r| r.resolved()));
            any += usize::from(inst.n_resolved() > 0);
        }
        return Ok(RmAtK {
            k,
            mean: T::from_count(resolved) / n_inst,
            variance: T::zero(),
            reps: 1,
            same_draw_pass: T::from_count(any) / n_inst,
            expected,
        });
    }

    let mut rates = Vec::with_capacity(opts.reps);
    let mut oracle = Vec::with_capacity(opts.reps);
    for rep in 0..opts.reps {
        let mut resolved = 0usize;
        let mut any = 0usize;
        for (inst, &k_eff) in dataset.instances.iter().zip(&ks) {
            let mut rng = substream(opts.seed, rep as u64, &inst.instance_id);
            let picked = rand::seq::index::sample(&mut rng, inst.len(), k_eff);
            let ids: Vec<u64> = picked.iter().map(|i| inst.runs[i].run_id).collect();
            let best = select_best(inst, &ids)?;
            resolved += usize::from(inst.get(best).is_some_and(|r| r.resolved()));
            any += usize::from(picked.iter().any(|i| inst.runs[i].resolved()));
        }
        rates.push(T::from_count(resolved) / n_inst);
        oracle.push(T::from_count(any) / n_inst);
    }
    Ok(RmAtK {
        k,
        mean: mean(&rates).expect("reps > 0"),
        variance: population_variance(&rates).expect("reps > 0"),
        reps: opts.reps,
        same_draw_pass: mean(&oracle).expect("reps > 0"),
        expected,
    })
}

/// Probability that the selected run resolves when `k` of the instance's
/// runs are drawn uniformly without replacement. The run at selection
/// priority `j` (0 = highest score, lowest id on ties) wins with
/// probability `C(n-1-j, k-1) / C(n, k)`.
pub fn expected_selection<T: Real>(instance: &InstanceRuns<T>, k: usize) -> T {
    let n = instance.len();
    if k == 0 || n == 0 {
        return T::zero();
    }
    let k = k.min(n);
    let mut order: Vec<&crate::trajdata::TrajectoryRecord<T>> = instance.runs.iter().collect();
    order.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.run_id.cmp(&b.run_id))
    });
    let mut p = T::from_count(k) / T::from_count(n);
    let mut terms = Vec::with_capacity(n);
    for (j, rec) in order.iter().enumerate() {
        if n - j < k {
            break;
        }
        if rec.resolved() {
            terms.push(p);
        }
        if j + 1 < n {
            p *= T::from_count(n - j - k) / T::from_count(n - 1 - j);
        }
    }
    crate::scalar::pairwise_sum(&terms)
}

/// `1 - C(n-c, k) / C(n, k)` as a running product.
pub fn pass_at_k_single<T: Real>(n: usize, c: usize, k: usize) -> T {
    if n - c < k {
        return T::one();
    }
    let mut miss = T::one();
    for i in 0..k {
        miss *= T::from_count(n - c - i) / T::from_count(n - i);
    }
    T::one() - miss
}

/// Unbiased pass@k averaged over instances.
pub fn pass_at_k<T: Real>(dataset: &Dataset<T>, k: usize, ragged: bool) -> Result<PassAtK<T>, MetricsError> {
    check_k(dataset, k)?;
    let mut per = Vec::with_capacity(dataset.instances.len());
    for inst in &dataset.instances {
        let k_eff = effective_k(inst, k, ragged)?;
        per.push(pass_at_k_single::<T>(inst.len(), inst.n_resolved(), k_eff));
    }
    Ok(PassAtK {
        k,
        rate: mean(&per).expect("non-empty"),
    })
}

/// Fraction of all runs that resolve (expected single-sample success).
pub fn resolve_rate<T: Real>(dataset: &Dataset<T>) -> T {
    let n = dataset.n_records();
    if n == 0 {
        return T::zero();
    }
    T::from_count(dataset.records().filter(|r| r.resolved()).count()) / T::from_count(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewards::Status;
    use crate::trajdata::TrajectoryRecord;
    use rand::Rng;
    use std::collections::BTreeMap;

    fn inst(scores: &[(u64, f64, bool)]) -> InstanceRuns<f64> {
        InstanceRuns {
            instance_id: "x".into(),
            runs: scores
                .iter()
                .map(|&(id, s, ok)| {
                    TrajectoryRecord::new("x", id, s, if ok { Status::Resolved } else { Status::Failed })
                })
                .collect(),
        }
    }

    fn dataset(rows: &[(&str, u64, f64, bool)]) -> Dataset<f64> {
        let recs = rows
            .iter()
            .map(|&(i, r, s, ok)| TrajectoryRecord::new(i, r, s, if ok { Status::Resolved } else { Status::Failed }))
            .collect();
        Dataset::from_records(recs, BTreeMap::new()).unwrap()
    }

    #[test]
    fn select_examples() {
        let i = inst(&[(0, 0.2, false), (1, 0.9, true)]);
        assert_eq!(select_best(&i, &[0, 1]).unwrap(), 1);
        let i = inst(&[(0, 0.7, false), (1, 0.7, true)]);
        assert_eq!(select_best(&i, &[1, 0]).unwrap(), 0);
        assert!(matches!(select_best(&i, &[5]), Err(MetricsError::UnknownRun { .. })));
        assert_eq!(select_best(&i, &[]), Err(MetricsError::EmptySubset));
    }

    #[test]
    fn select_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let rows: Vec<(u64, f64, bool)> = (0..32).map(|i| (i, rng.random::<f64>(), false)).collect();
            let i = inst(&rows);
            let mut best = 0;
            for r in &rows {
                if r.1 > rows[best as usize].1 {
                    best = r.0;
                }
            }
            let ids: Vec<u64> = (0..32).collect();
            assert_eq!(select_best(&i, &ids).unwrap(), best);
        }
    }

    #[test]
    fn pass_at_k_examples() {
        assert_eq!(pass_at_k_single::<f64>(4, 4, 2), 1.0);
        assert_eq!(pass_at_k_single::<f64>(4, 0, 3), 0.0);
        assert!((pass_at_k_single::<f64>(4, 2, 2) - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(pass_at_k_single::<f64>(5, 1, 5), 1.0);
        let ds = dataset(&[("a", 0, 0.1, true), ("a", 1, 0.2, false)]);
        assert!(matches!(pass_at_k(&ds, 3, false), Err(MetricsError::NotEnoughRuns { .. })));
        assert_eq!(pass_at_k(&ds, 3, true).unwrap().rate, 1.0);
        assert_eq!(pass_at_k(&ds, 0, false), Err(MetricsError::BadK));
    }

    #[test]
    fn single_run_instances() {
        let ds = dataset(&[("a", 0, 0.1, true), ("b", 0, 0.9, false), ("c", 0, 0.4, true), ("d", 0, 0.3, false)]);
        let r = rm_at_k(&ds, 1, &RmAtKOptions::default()).unwrap();
        assert_eq!((r.mean, r.variance, r.reps), (0.5, 0.0, 1));
        assert_eq!(resolve_rate(&ds), 0.5);
    }

    #[test]
    fn adversarial_full_k_is_zero() {
        let ds = dataset(&[
            ("a", 0, 0.0, true),
            ("a", 1, 1.0, false),
            ("b", 0, 1.0, false),
            ("b", 1, 0.0, true),
        ]);
        let r = rm_at_k(&ds, 2, &RmAtKOptions::default()).unwrap();
        assert_eq!(r.mean, 0.0);
        assert_eq!(pass_at_k(&ds, 2, false).unwrap().rate, 1.0);
    }

    #[test]
    fn k_one_expected_rate() {
        // Each instance has 4 runs, 1 resolved: RM@1 averages to ~0.25.
        let mut rows = Vec::new();
        let names: Vec<String> = (0..400).map(|i| format!("i{i}")).collect();
        for n in &names {
            for r in 0..4 {
                rows.push((n.as_str(), r, 0.5, r == 0));
            }
        }
        let ds = dataset(&rows);
        let r = rm_at_k(&ds, 1, &RmAtKOptions { reps: 5, seed: 3, ragged: false }).unwrap();
        assert!((r.mean - 0.25).abs() < 0.05, "{}", r.mean);
        assert!(r.variance > 0.0);
    }

    #[test]
    fn ragged_and_errors() {
        let ds = dataset(&[("a", 0, 0.3, true), ("a", 1, 0.2, false), ("b", 0, 0.1, false)]);
        assert!(matches!(rm_at_k(&ds, 2, &RmAtKOptions::default()), Err(MetricsError::NotEnoughRuns { .. })));
        let r = rm_at_k(&ds, 2, &RmAtKOptions { ragged: true, ..Default::default() }).unwrap();
        assert_eq!((r.mean, r.reps), (0.5, 1));
        assert_eq!(rm_at_k(&ds, 0, &RmAtKOptions::default()), Err(MetricsError::BadK));
        let opts = RmAtKOptions { reps: 0, ..Default::default() };
        assert_eq!(rm_at_k(&ds, 1, &opts), Err(MetricsError::BadReps));
    }

    /// Enumerates every k-subset and averages the selected run's outcome.
    fn brute_expected(i: &InstanceRuns<f64>, k: usize) -> f64 {
        let n = i.len();
        let (mut hit, mut total) = (0.0, 0.0);
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let ids: Vec<u64> = (0..n).filter(|b| mask >> b & 1 == 1).map(|b| i.runs[b].run_id).collect();
            let best = select_best(i, &ids).unwrap();
            total += 1.0;
            if i.get(best).unwrap().resolved() {
                hit += 1.0;
            }
        }
        hit / total
    }

    #[test]
    fn expected_selection_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..40 {
            let n = rng.random_range(1..=10);
            let rows: Vec<(u64, f64, bool)> = (0..n)
                .map(|id| (id as u64, (rng.random_range(0..5) as f64) / 4.0, rng.random::<bool>()))
                .collect();
            let i = inst(&rows);
            for k in 1..=n {
                assert!((expected_selection(&i, k) - brute_expected(&i, k)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn substreams_are_stable() {
        let a: u64 = substream(1, 0, "x").random();
        let b: u64 = substream(1, 0, "x").random();
        let c: u64 = substream(1, 1, "x").random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
