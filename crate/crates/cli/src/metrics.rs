use std::fmt::Write;

use rmlab::fmt::{opt, sig};
use rmlab::metrics::{evaluate, EvalOptions, RmAtKOptions, DEFAULT_HIST_BINS};
use rmlab::trajdata::{parse_records, UnscoredPolicy};
use rmlab::{Data, Report};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::manifest::{read_input, OutDir, RunManifest};
use crate::svg::{self, Axes, ReliabilityBin, Series};
use crate::MetricsArgs;

/// Powers of two up to `max_k`.
pub fn default_ks(max_k: usize) -> Vec<usize> {
    std::iter::successors(Some(1usize), |k| k.checked_mul(2)).take_while(|&k| k <= max_k).collect()
}

fn unscored_name(p: UnscoredPolicy) -> &'static str {
    match p {
        UnscoredPolicy::Exclude => "exclude",
        UnscoredPolicy::ScoreZero => "zero",
    }
}

/// Fixed-decimal one-screen summary.
pub fn summary(report: &Report, opts: &EvalOptions) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "records {}  instances {}  min runs/instance {}",
        report.n_records, report.n_instances, report.n_runs_per_instance
    );
    let _ = writeln!(s, "resolve rate  {:.6}", report.resolve_rate);
    match report.auc {
        Some(a) => {
            let _ = writeln!(s, "AUC           {a:.6}");
        }
        None => {
            let _ = writeln!(s, "AUC           undefined (single class)");
        }
    }
    let binning = match opts.binning {
        rmlab::metrics::Binning::EqualWidth => "equal-width",
        rmlab::metrics::Binning::EqualMass => "equal-mass",
    };
    let _ = writeln!(s, "ECE           {:.6}  ({} bins, {binning})", report.ece, opts.bins);
    let _ = writeln!(s, "{:>6}  {:>10}  {:>12}  {:>10}", "k", "RM@k", "variance", "pass@k");
    for (rm, pass) in report.rm_at_k.iter().zip(&report.pass_at_k) {
        let _ = writeln!(s, "{:>6}  {:>10.6}  {:>12.3e}  {:>10.6}", rm.k, rm.mean, rm.variance, pass.rate);
    }
    s
}

fn reliability_csv(report: &Report) -> String {
    let mut s = String::from("bin_lo,bin_hi,count,conf,acc,gap\n");
    for b in &report.bins {
        let _ = writeln!(s, "{},{},{},{},{},{}", sig(b.bin_lo), sig(b.bin_hi), b.count, sig(b.conf), sig(b.acc), sig(b.gap()));
    }
    s
}

fn rm_csv(report: &Report) -> String {
    let mut s = String::from("k,rm_mean,rm_variance,reps,same_draw_pass,expected,pass_at_k\n");
    for (rm, pass) in report.rm_at_k.iter().zip(&report.pass_at_k) {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            rm.k,
            sig(rm.mean),
            sig(rm.variance),
            rm.reps,
            sig(rm.same_draw_pass),
            sig(rm.expected),
            sig(pass.rate)
        );
    }
    s
}

fn separation_csv(report: &Report) -> String {
    let sep = &report.separation;
    let mut s = format!(
        "# pos_mean={} neg_mean={} overlap={}\nbin_lo,bin_hi,resolved,unresolved\n",
        opt(sep.pos_mean),
        opt(sep.neg_mean),
        opt(sep.overlap)
    );
    for ((lo, hi), (p, n)) in sep.edges.iter().zip(sep.pos_counts.iter().zip(&sep.neg_counts)) {
        let _ = writeln!(s, "{},{},{p},{n}", sig(*lo), sig(*hi));
    }
    s
}

fn tts_svg(report: &Report) -> String {
    let x = |k: usize| (k as f64).log2();
    let max_k = report.rm_at_k.iter().map(|r| r.k).max().unwrap_or(1);
    let series = vec![
        Series {
            name: "RM@k".into(),
            points: report.rm_at_k.iter().map(|r| (x(r.k), r.mean)).collect(),
        },
        Series {
            name: "pass@k".into(),
            points: report.pass_at_k.iter().map(|p| (x(p.k), p.rate)).collect(),
        },
    ];
    let axes = Axes {
        title: "Test-time scaling".into(),
        x_label: "k".into(),
        y_label: "resolve rate".into(),
        x_range: (0.0, x(max_k).max(1.0)),
        y_range: (0.0, 1.0),
        x_ticks: report.rm_at_k.iter().map(|r| (x(r.k), r.k.to_string())).collect(),
        y_ticks: svg::linear_ticks(0.0, 1.0, 5, 1),
    };
    svg::line_chart(axes, &series)
}

pub fn run(args: &MetricsArgs) -> Result<(), CliError> {
    let bytes = read_input(&args.dataset)?;
    let mut dataset: Data = parse_records(bytes.as_slice()).map_err(|e| CliError::io(&args.dataset, e))?;
    if let Some(limit) = args.context_limit {
        dataset = dataset.apply_context_limit(limit, args.unscored).map_err(CliError::input)?;
    }
    if dataset.instances.is_empty() {
        return Err(CliError::Input(format!("{}: dataset has no records", args.dataset.display())));
    }
    let ks = match &args.k {
        Some(ks) => ks.clone(),
        None => default_ks(if args.ragged { dataset.max_runs() } else { dataset.min_runs() }),
    };
    let opts = EvalOptions {
        ks,
        rm: RmAtKOptions {
            reps: args.reps,
            seed: args.seed,
            ragged: args.ragged,
        },
        bins: args.bins,
        binning: args.binning,
        hist_bins: DEFAULT_HIST_BINS,
    };
    let report = evaluate(&dataset, &opts).map_err(CliError::input)?;

    let config = json!({
        "dataset": args.dataset.display().to_string(),
        "k": opts.ks,
        "reps": opts.rm.reps,
        "seed": opts.rm.seed,
        "ragged": opts.rm.ragged,
        "bins": opts.bins,
        "binning": opts.binning,
        "hist_bins": opts.hist_bins,
        "context_limit": args.context_limit,
        "unscored": unscored_name(args.unscored),
    });
    let text = summary(&report, &opts);
    print!("{text}");

    let mut out = OutDir::create(&args.out)?;
    out.write_json(
        "report.json",
        &json!({
            "source": args.dataset.display().to_string(),
            "meta": Value::Object(dataset.meta.clone().into_iter().collect()),
            "options": config,
            "metrics": report,
        }),
    )?;
    out.write("summary.txt", &text)?;
    out.write("reliability.csv", reliability_csv(&report))?;
    out.write("rm_at_k.csv", rm_csv(&report))?;
    out.write("separation.csv", separation_csv(&report))?;
    let bins: Vec<ReliabilityBin> = report
        .bins
        .iter()
        .map(|b| ReliabilityBin {
            lo: b.bin_lo,
            hi: b.bin_hi,
            acc: b.acc,
            conf: b.conf,
            count: b.count,
        })
        .collect();
    out.write("reliability.svg", svg::reliability_diagram(&format!("Reliability (ECE {:.4})", report.ece), &bins))?;
    out.write("tts.svg", tts_svg(&report))?;

    let mut manifest = RunManifest::new("metrics", config, args.seed);
    manifest.add_input(&args.dataset, &bytes);
    out.finish(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_ks_are_powers_of_two() {
        assert_eq!(default_ks(32), vec![1, 2, 4, 8, 16, 32]);
        assert_eq!(default_ks(5), vec![1, 2, 4]);
        assert_eq!(default_ks(1), vec![1]);
        assert!(default_ks(0).is_empty());
    }
}
