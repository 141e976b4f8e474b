use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::path::Path;

use rmlab::fmt::sig;
use rmlab::Report;
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::error::CliError;
use crate::manifest::{read_input, OutDir, RunManifest};
use crate::ReportArgs;

#[derive(Deserialize)]
struct ReportFile {
    #[serde(default)]
    meta: Map<String, Value>,
    metrics: Report,
}

/// One cell of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub auc: Option<f64>,
    pub ece: f64,
    pub rm: Option<f64>,
}

#[derive(Debug, Default)]
pub struct Table {
    pub k: usize,
    pub rows: Vec<String>,
    pub policies: Vec<String>,
    pub cells: BTreeMap<(String, String), Cell>,
}

fn meta_str(meta: &Map<String, Value>, key: &str) -> Option<String> {
    match meta.get(key)? {
        Value::String(s) => Some(s.clone()),
        Value::Null => None,
        other => Some(other.to_string()),
    }
}

fn row_name(path: &Path, meta: &Map<String, Value>) -> String {
    meta_str(meta, "verifier").unwrap_or_else(|| {
        path.parent()
            .and_then(|p| p.file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string())
    })
}

pub fn build(inputs: &[(String, Vec<u8>)], k: Option<usize>) -> Result<Table, String> {
    let mut parsed = Vec::new();
    for (path, bytes) in inputs {
        let f: ReportFile = serde_json::from_slice(bytes).map_err(|e| format!("{path}: {e}"))?;
        parsed.push((path.as_str(), f));
    }
    let k = match k {
        Some(k) => k,
        None => parsed
            .iter()
            .map(|(_, f)| f.metrics.rm_at_k.iter().map(|r| r.k).collect::<BTreeSet<_>>())
            .reduce(|a, b| a.intersection(&b).copied().collect())
            .and_then(|s| s.last().copied())
            .ok_or("the reports share no k value; pass --k")?,
    };
    let mut table = Table {
        k,
        ..Default::default()
    };
    for (path, f) in parsed {
        let row = row_name(Path::new(path), &f.meta);
        let policy = meta_str(&f.meta, "policy").unwrap_or_else(|| "-".into());
        let cell = Cell {
            auc: f.metrics.auc,
            ece: f.metrics.ece,
            rm: f.metrics.rm_at_k.iter().find(|r| r.k == k).map(|r| r.mean),
        };
        if !table.rows.contains(&row) {
            table.rows.push(row.clone());
        }
        if !table.policies.contains(&policy) {
            table.policies.push(policy.clone());
        }
        if table.cells.insert((row.clone(), policy.clone()), cell).is_some() {
            return Err(format!("{path}: a second report for verifier '{row}' under policy '{policy}'"));
        }
    }
    Ok(table)
}

fn pct(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| format!("{:.1}", 100.0 * v))
}

impl Table {
    pub fn render(&self) -> String {
        let rw = self.rows.iter().map(|r| r.len()).max().unwrap_or(0).max(8);
        let rm_label = format!("RM@{}", self.k);
        let mut s = format!("{:<rw$}", "verifier");
        for p in &self.policies {
            let _ = write!(s, " | {:^23}", p);
        }
        s.push('\n');
        let _ = write!(s, "{:<rw$}", "");
        for _ in &self.policies {
            let _ = write!(s, " | {:>7}{:>7}{:>9}", "AUC", "ECE", rm_label);
        }
        s.push('\n');
        for row in &self.rows {
            let _ = write!(s, "{:<rw$}", row);
            for p in &self.policies {
                match self.cells.get(&(row.clone(), p.clone())) {
                    Some(c) => {
                        let _ = write!(s, " | {:>7}{:>7}{:>9}", pct(c.auc), pct(Some(c.ece)), pct(c.rm));
                    }
                    None => {
                        let _ = write!(s, " | {:>7}{:>7}{:>9}", "-", "-", "-");
                    }
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("verifier,policy,k,auc,ece,rm_at_k\n");
        for row in &self.rows {
            for p in &self.policies {
                if let Some(c) = self.cells.get(&(row.clone(), p.clone())) {
                    let opt = |x: Option<f64>| x.map_or(String::new(), sig);
                    let _ = writeln!(s, "{row},{p},{},{},{},{}", self.k, opt(c.auc), sig(c.ece), opt(c.rm));
                }
            }
        }
        s
    }
}

pub fn run(args: &ReportArgs) -> Result<(), CliError> {
    let mut inputs = Vec::new();
    for p in &args.reports {
        inputs.push((p.display().to_string(), read_input(p)?));
    }
    let table = build(&inputs, args.k).map_err(CliError::Input)?;
    print!("{}", table.render());
    if let Some(dir) = &args.out {
        let mut out = OutDir::create(dir)?;
        out.write("report.csv", table.to_csv())?;
        out.write("report.txt", table.render())?;
        let mut manifest = RunManifest::new("report", json!({ "k": table.k, "reports": inputs.iter().map(|i| &i.0).collect::<Vec<_>>() }), 0);
        for (p, bytes) in &inputs {
            manifest.add_input(Path::new(p), bytes);
        }
        out.finish(manifest)?;
    }
    Ok(())
}
