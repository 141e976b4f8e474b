use std::collections::BTreeMap;

use proptest::prelude::*;
use rmlab::metrics::{auc, ece_with, evaluate, select_best, separation_report, Binning, EvalOptions, RmAtKOptions};
use rmlab::rewards::{group_advantage_of, Status};
use rmlab::scalar::{logit, sigmoid};
use rmlab::simlab::{sample_scored, split, SyntheticScorer};
use rmlab::trajdata::parse_records;
use rmlab::{Data, Data32, Record, Record32};

fn status(ok: bool) -> Status {
    if ok {
        Status::Resolved
    } else {
        Status::Failed
    }
}

fn build(cells: &[(u16, bool)], runs: usize) -> Data {
    let recs = cells
        .iter()
        .enumerate()
        .map(|(i, &(s, ok))| Record::new(format!("i{:02}", i / runs), (i % runs) as u64, s as f64 / 1000.0, status(ok)))
        .collect();
    Data::from_records(recs, BTreeMap::new()).unwrap()
}

fn mixed(labels: &[bool]) -> bool {
    labels.iter().any(|&l| l) && labels.iter().any(|&l| !l)
}

fn cells() -> impl Strategy<Value = Vec<(u16, bool)>> {
    proptest::collection::vec((0u16..=1000, any::<bool>()), 8..160)
}

proptest! {
    #[test]
    fn ece_is_weighted_gap_of_its_bins(cells in cells(), m in 1usize..20, mass in any::<bool>()) {
        let (s, l): (Vec<f64>, Vec<bool>) = cells.iter().map(|&(s, ok)| (s as f64 / 1000.0, ok)).unzip();
        let binning = if mass { Binning::EqualMass } else { Binning::EqualWidth };
        let cal = ece_with(&s, &l, m, binning).unwrap();
        let n = s.len() as f64;
        let total: f64 = cal.bins.iter().map(|b| b.count as f64 / n * (b.acc - b.conf).abs()).sum();
        prop_assert!((cal.ece - total).abs() <= 1e-12);
        prop_assert_eq!(cal.bins.iter().map(|b| b.count).sum::<usize>(), s.len());
        for b in &cal.bins {
            prop_assert!(b.bin_lo < b.bin_hi);
            if b.count > 0 {
                prop_assert!((0.0..=1.0).contains(&b.conf) && (0.0..=1.0).contains(&b.acc));
            }
        }
        prop_assert!((0.0..=1.0).contains(&cal.ece));
    }

    #[test]
    fn monotone_warp_keeps_ranking_metrics(cells in cells(), t in 0.2f64..5.0) {
        let base = build(&cells, 8);
        let mut warped = base.clone();
        for inst in &mut warped.instances {
            for r in &mut inst.runs {
                r.score = sigmoid(t * logit(r.score));
            }
        }
        let (s0, l0) = base.scores_and_labels();
        let (s1, l1) = warped.scores_and_labels();
        if mixed(&l0) {
            prop_assert!((auc(&s0, &l0).unwrap() - auc(&s1, &l1).unwrap()).abs() <= 1e-12);
        }
        for (a, b) in base.instances.iter().zip(&warped.instances) {
            let ids: Vec<u64> = a.runs.iter().map(|r| r.run_id).collect();
            for len in 1..=ids.len() {
                prop_assert_eq!(select_best(a, &ids[..len]).unwrap(), select_best(b, &ids[..len]).unwrap());
            }
        }
    }

    #[test]
    fn f32_and_f64_agree(cells in cells()) {
        let runs = 4;
        let usable = cells.len() / runs * runs;
        let d64 = build(&cells[..usable], runs);
        let recs32 = d64.records().map(|r| Record32::new(r.instance_id.clone(), r.run_id, r.score as f32, r.status)).collect();
        let d32 = Data32::from_records(recs32, BTreeMap::new()).unwrap();
        let opts = EvalOptions { ks: vec![1, 2, 4], ..Default::default() };
        let a = evaluate(&d64, &opts).unwrap();
        let b = evaluate(&d32, &opts).unwrap();
        prop_assert_eq!(a.auc.is_some(), b.auc.is_some());
        if let (Some(x), Some(y)) = (a.auc, b.auc) {
            prop_assert!((x - y as f64).abs() < 1e-5);
        }
        prop_assert!((a.ece - b.ece as f64).abs() < 1e-5);
        for (x, y) in a.rm_at_k.iter().zip(&b.rm_at_k) {
            prop_assert!((x.mean - y.mean as f64).abs() < 1e-5);
        }
    }

    #[test]
    fn advantages_are_standardised(rewards in proptest::collection::vec(-3.0f64..3.0, 2..40)) {
        let adv = group_advantage_of(&rewards).unwrap();
        let n = adv.len() as f64;
        let mean = adv.iter().sum::<f64>() / n;
        let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        if adv.iter().all(|&a| a == 0.0) {
            let m = rewards.iter().sum::<f64>() / n;
            prop_assert!((rewards.iter().map(|r| (r - m).powi(2)).sum::<f64>() / n).sqrt() < 1e-12);
        } else {
            prop_assert!(mean.abs() <= 1e-9);
            prop_assert!((var.sqrt() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn separation_counts_partition_classes(cells in cells(), bins in 1usize..30) {
        let (s, l): (Vec<f64>, Vec<bool>) = cells.iter().map(|&(s, ok)| (s as f64 / 1000.0, ok)).unzip();
        let sep = separation_report(&s, &l, bins).unwrap();
        prop_assert_eq!(sep.pos_counts.iter().sum::<usize>(), l.iter().filter(|&&x| x).count());
        prop_assert_eq!(sep.neg_counts.iter().sum::<usize>(), l.iter().filter(|&&x| !x).count());
        if let Some(o) = sep.overlap {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&o));
        }
    }
}

#[test]
fn jsonl_round_trip_preserves_report() {
    let cells: Vec<(u16, bool)> = (0..96u32).map(|i| ((i * 379 % 1001) as u16, i % 5 < 2)).collect();
    let mut ds = build(&cells, 8);
    ds.meta.insert("policy".into(), "p".into());
    let mut text = Vec::new();
    ds.write_jsonl(&mut text).unwrap();
    let back: Data = parse_records(text.as_slice()).unwrap();
    assert_eq!(back, ds);
    let opts = EvalOptions {
        ks: vec![1, 2, 4, 8],
        rm: RmAtKOptions {
            reps: 5,
            seed: 11,
            ragged: false,
        },
        ..Default::default()
    };
    assert_eq!(evaluate(&back, &opts).unwrap(), evaluate(&ds, &opts).unwrap());
}

#[test]
fn calibrated_scorer_samples_are_calibrated() {
    for d in [0.5, 1.0, 2.0] {
        let scorer = SyntheticScorer::calibrated(d, 0.3).unwrap();
        let (s, l) = split(&sample_scored(&scorer, 100_000, 7));
        let cal = ece_with(&s, &l, 10, Binning::EqualWidth).unwrap();
        assert!(cal.ece < 0.01, "d={d}: ece {}", cal.ece);
        let over = SyntheticScorer::distorted(d, 0.3, 3.0).unwrap();
        let (s, l) = split(&sample_scored(&over, 100_000, 7));
        assert!(ece_with(&s, &l, 10, Binning::EqualWidth).unwrap().ece > 0.05, "d={d}");
    }
}

#[test]
fn partial_credit_lifts_near_misses() {
    let scorer = SyntheticScorer::calibrated(2.0, 0.5).unwrap();
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
    let mean = |progress: f64, rng: &mut rand_chacha::ChaCha8Rng| {
        (0..20_000).map(|_| scorer.draw(false, progress, 0.6, rng).score).sum::<f64>() / 20_000.0
    };
    let far = mean(0.0, &mut rng);
    let near = mean(0.9, &mut rng);
    assert!(near > far + 0.1, "{far} {near}");
}

#[test]
fn logit_only_records_score_like_the_formula() {
    let text = "{\"instance_id\":\"a\",\"run_id\":0,\"logit_yes\":1.0,\"logit_no\":0.0,\"status\":\"failed\"}\n";
    let ds: Data = parse_records(text.as_bytes()).unwrap();
    let want = 1f64.exp() / (1f64.exp() + 1.0);
    assert!((ds.instances[0].runs[0].score - want).abs() < 1e-15);
}
