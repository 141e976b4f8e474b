use rmlab::simlab::{run_experiment, ExperimentConfig, ExperimentRun};

use crate::error::CliError;
use crate::manifest::{read_input, OutDir, RunManifest};
use crate::svg::{self, Axes, Series};
use crate::SimulateArgs;

const REACH_THRESHOLD: f64 = 0.9;

fn curves_svg(run: &ExperimentRun, steps: usize) -> String {
    let series: Vec<Series> = run
        .variants
        .iter()
        .map(|v| Series {
            name: v.name.clone(),
            points: v.trace.rows.iter().map(|r| (r.step as f64, r.success_prob)).collect(),
        })
        .collect();
    let x_max = steps.max(1) as f64;
    let axes = Axes {
        title: format!("Success probability (seed {})", run.seed),
        x_label: "step".into(),
        y_label: "P(correct)".into(),
        x_range: (0.0, x_max),
        y_range: (0.0, 1.0),
        x_ticks: svg::linear_ticks(0.0, x_max, 4, 0),
        y_ticks: svg::linear_ticks(0.0, 1.0, 5, 1),
    };
    svg::line_chart(axes, &series)
}

fn summary(run: &ExperimentRun) -> String {
    let mut s = format!("{:<24} {:>14} {:>10} {:>12}\n", "variant", "mode", "final", "step@0.9");
    for v in &run.variants {
        let fin = v.trace.final_success().or(v.snapshots.first().map(|s| s.success_prob));
        s.push_str(&format!(
            "{:<24} {:>14} {:>10} {:>12}\n",
            v.name,
            v.mode.as_str(),
            fin.map_or("-".into(), |f| format!("{f:.6}")),
            v.trace.first_step_reaching(REACH_THRESHOLD).map_or("-".into(), |k| k.to_string())
        ));
    }
    s
}

pub fn run(args: &SimulateArgs) -> Result<(), CliError> {
    let bytes = read_input(&args.config)?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| CliError::io(&args.config, e))?;
    let mut cfg = ExperimentConfig::from_toml(&text).map_err(|e| CliError::io(&args.config, e))?;
    if let Some(seed) = args.seed {
        cfg.training.seed = seed;
    }
    if let Some(steps) = args.steps {
        cfg.training.steps = steps;
    }
    cfg.validate().map_err(|e| CliError::io(&args.config, e))?;
    let trace_path = cfg.output.trace.clone();
    let mut out = OutDir::create(&args.out)?;
    if !std::path::Path::new(&trace_path).components().all(|c| matches!(c, std::path::Component::Normal(_))) {
        return Err(CliError::Input(format!(
            "{}: output.trace {trace_path:?} must be a relative path inside --out",
            args.config.display()
        )));
    }

    let run = run_experiment(&cfg).map_err(|e| CliError::io(&args.config, e))?;
    print!("{}", summary(&run));

    out.write(&trace_path, run.combined_csv())?;
    for v in &run.variants {
        out.write(&format!("traces/{}.csv", v.name), v.trace.to_csv())?;
    }
    let snapshots: Vec<_> = run
        .variants
        .iter()
        .map(|v| serde_json::json!({ "variant": v.name, "mode": v.mode, "scorer": v.scorer, "snapshots": v.snapshots }))
        .collect();
    out.write_json("snapshots.json", &snapshots)?;
    out.write("curves.svg", curves_svg(&run, cfg.training.steps))?;

    let resolved = serde_json::to_value(&cfg).map_err(CliError::input)?;
    let mut manifest = RunManifest::new("simulate", resolved, cfg.training.seed);
    manifest.add_input(&args.config, &bytes);
    out.finish(manifest)
}
