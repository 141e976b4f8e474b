use std::collections::BTreeMap;

use rmlab::fmt::sig;
use rmlab::rewards::{group_advantage_of, hybrid_reward, HybridRewardInput, Status};
use serde_json::json;

use crate::error::CliError;
use crate::manifest::{read_input, OutDir, RunManifest};
use crate::ShapeArgs;

struct Row {
    status: Status,
    score: String,
    group: Option<String>,
    reward: f64,
}

/// Hybrid rewards, and per-group advantages when a `group` column exists.
pub fn shape_csv(input: &[u8]) -> Result<String, String> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let status_col = col("status").ok_or("missing column 'status'")?;
    let score_col = col("score").ok_or("missing column 'score'")?;
    let group_col = col("group");

    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| format!("line {line}: {e}"))?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let status: Status = field(status_col).parse().map_err(|e| format!("line {line}: {e}"))?;
        let score_text = field(score_col);
        let score: f64 = score_text
            .parse()
            .map_err(|_| format!("line {line}: score '{score_text}' is not a number"))?;
        let reward = hybrid_reward(HybridRewardInput { status, score_ef: score }).map_err(|e| format!("line {line}: {e}"))?;
        rows.push(Row {
            status,
            score: score_text.to_string(),
            group: group_col.map(|c| field(c).to_string()),
            reward,
        });
    }

    let mut advantages = vec![None; rows.len()];
    if group_col.is_some() {
        let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, r) in rows.iter().enumerate() {
            groups.entry(r.group.as_deref().unwrap_or("")).or_default().push(i);
        }
        for (name, idx) in &groups {
            let rewards: Vec<f64> = idx.iter().map(|&i| rows[i].reward).collect();
            let adv = group_advantage_of(&rewards).map_err(|e| format!("group '{name}': {e}"))?;
            for (&i, a) in idx.iter().zip(adv) {
                advantages[i] = Some(a);
            }
        }
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["status", "score"];
    if group_col.is_some() {
        header.push("group");
    }
    header.push("reward");
    if group_col.is_some() {
        header.push("advantage");
    }
    w.write_record(&header).map_err(|e| e.to_string())?;
    for (r, adv) in rows.iter().zip(&advantages) {
        let mut fields = vec![r.status.as_str().to_string(), r.score.clone()];
        if let Some(g) = &r.group {
            fields.push(g.clone());
        }
        fields.push(sig(r.reward));
        if let Some(a) = adv {
            fields.push(sig(*a));
        }
        w.write_record(&fields).map_err(|e| e.to_string())?;
    }
    let bytes = w.into_inner().map_err(|e| e.to_string())?;
    String::from_utf8(bytes).map_err(|e| e.to_string())
}

pub fn run(args: &ShapeArgs) -> Result<(), CliError> {
    let bytes = read_input(&args.input)?;
    let csv = shape_csv(&bytes).map_err(|e| CliError::io(&args.input, e))?;
    print!("{csv}");
    let mut out = OutDir::create(&args.out)?;
    out.write("rewards.csv", &csv)?;
    let mut manifest = RunManifest::new("shape", json!({ "input": args.input.display().to_string() }), 0);
    manifest.add_input(&args.input, &bytes);
    out.finish(manifest)
}
