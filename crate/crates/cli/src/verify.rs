use std::fmt::Write;

use rmlab::fmt::sig;
use rmlab::simlab::{run_suite, CheckResult, SyntheticScorer, VerifyOptions};
use serde_json::json;

use crate::error::CliError;
use crate::manifest::{OutDir, RunManifest};
use crate::VerifyArgs;

/// Separation and prior of the scorer replaced by `--inject`.
const INJECT_D: f64 = 2.0;
const INJECT_P: f64 = 0.5;

pub fn table(results: &[CheckResult]) -> String {
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(5).max(5);
    let mut s = format!("{:<14} {:<width$} {:>14} {:>22}  verdict\n", "suite", "check", "estimate", "tolerance");
    for r in results {
        let _ = writeln!(
            s,
            "{:<14} {:<width$} {:>14.6e} {:>22}  {}",
            r.suite.as_str(),
            r.name,
            r.estimate,
            r.tolerance,
            if r.passed { "PASS" } else { "FAIL" }
        );
    }
    s
}

fn results_csv(results: &[CheckResult]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["suite", "check", "estimate", "tolerance", "passed"]).map_err(CliError::input)?;
    for r in results {
        w.write_record([r.suite.as_str(), &r.name, &sig(r.estimate), &r.tolerance, if r.passed { "true" } else { "false" }])
            .map_err(CliError::input)?;
    }
    String::from_utf8(w.into_inner().map_err(CliError::input)?).map_err(CliError::input)
}

pub fn run(args: &VerifyArgs) -> Result<(), CliError> {
    let inject = match args.inject {
        Some(f) => Some(SyntheticScorer::distorted(INJECT_D, INJECT_P, f).map_err(CliError::input)?),
        None => None,
    };
    let opts = VerifyOptions {
        seed: args.seed,
        n: args.n,
        inject,
    };
    let results = run_suite(args.suite, &opts).map_err(CliError::input)?;
    print!("{}", table(&results));

    if let Some(dir) = &args.out {
        let mut out = OutDir::create(dir)?;
        out.write("verify.csv", results_csv(&results)?)?;
        let config = json!({
            "suite": args.suite.as_str(),
            "n": args.n,
            "inject": args.inject,
        });
        out.finish(RunManifest::new("verify", config, args.seed))?;
    }

    let failed: Vec<String> = results.iter().filter(|r| !r.passed).map(|r| format!("{}/{}", r.suite, r.name)).collect();
    if failed.is_empty() {
        println!("all {} checks passed", results.len());
        Ok(())
    } else {
        Err(CliError::Check(format!("{} check(s) failed: {}", failed.len(), failed.join(", "))))
    }
}
