//! Trajectory-score data model and the line-delimited JSON reader/writer.
//!
//! One JSON object per line:
//!
//! ```text
//! {"instance_id":"django-1234","run_id":0,"logit_yes":-0.2,"logit_no":-1.9,"status":"resolved","n_tokens":41000}
//! {"instance_id":"django-1234","run_id":1,"score":0.31,"resolved":false}
//! ```
//!
//! A line of the form `{"meta": {...}}` carries dataset metadata. Keys that
//! are not part of the record schema are kept in [`TrajectoryRecord::extras`]
//! and ignored by every computation.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use serde::Deserialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::rewards::{score_from_logits, Status};
use crate::scalar::Real;

/// Largest tolerated gap between a stored score and the score implied by
/// the stored logits.
pub const LOGIT_SCORE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TrajError {
    #[error("line {line}: malformed record: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: duplicate record ({instance_id}, {run_id}), first seen on line {first_line}")]
    DuplicateKey {
        line: usize,
        first_line: usize,
        instance_id: String,
        run_id: u64,
    },
    #[error("line {line}: score {score} is outside [0, 1]")]
    ScoreOutOfRange { line: usize, score: f64 },
    #[error("line {line}: record has neither a logit pair nor a score")]
    MissingScore { line: usize },
    #[error("line {line}: score {score} disagrees with logits (implied {implied})")]
    LogitScoreMismatch { line: usize, score: f64, implied: f64 },
    #[error("line {line}: record has no status (use \"status\" or \"resolved\")")]
    MissingStatus { line: usize },
    #[error("duplicate record ({instance_id}, {run_id})")]
    DuplicateRecord { instance_id: String, run_id: u64 },
    #[error("record ({instance_id}, {run_id}) has no n_tokens")]
    MissingTokens { instance_id: String, run_id: u64 },
    #[error("context limit must be positive")]
    ZeroContextLimit,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord<T> {
    pub instance_id: String,
    pub run_id: u64,
    pub logit_yes: Option<T>,
    pub logit_no: Option<T>,
    /// Verifier score; materialised from the logits when only those are given.
    pub score: T,
    pub status: Status,
    pub n_tokens: Option<u64>,
    pub extras: BTreeMap<String, Value>,
}

impl<T: Real> TrajectoryRecord<T> {
    pub fn new(instance_id: impl Into<String>, run_id: u64, score: T, status: Status) -> Self {
        Self {
            instance_id: instance_id.into(),
            run_id,
            logit_yes: None,
            logit_no: None,
            score,
            status,
            n_tokens: None,
            extras: BTreeMap::new(),
        }
    }

    pub fn with_tokens(mut self, n_tokens: u64) -> Self {
        self.n_tokens = Some(n_tokens);
        self
    }

    pub fn resolved(&self) -> bool {
        self.status.is_resolved()
    }

    fn to_json(&self) -> Value {
        let mut m = Map::new();
        for (k, v) in &self.extras {
            m.insert(k.clone(), v.clone());
        }
        m.insert("instance_id".into(), Value::from(self.instance_id.clone()));
        m.insert("run_id".into(), Value::from(self.run_id));
        if let (Some(y), Some(n)) = (self.logit_yes, self.logit_no) {
            m.insert("logit_yes".into(), real_to_json(y));
            m.insert("logit_no".into(), real_to_json(n));
        }
        m.insert("score".into(), real_to_json(self.score));
        m.insert("status".into(), Value::from(self.status.as_str()));
        if let Some(t) = self.n_tokens {
            m.insert("n_tokens".into(), Value::from(t));
        }
        Value::Object(m)
    }
}

fn real_to_json<T: Real>(x: T) -> Value {
    Value::from(x.to_f64().unwrap_or(f64::NAN))
}

/// All runs of one task instance, sorted by `run_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRuns<T> {
    pub instance_id: String,
    pub runs: Vec<TrajectoryRecord<T>>,
}

impl<T: Real> InstanceRuns<T> {
    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn n_resolved(&self) -> usize {
        self.runs.iter().filter(|r| r.resolved()).count()
    }

    pub fn get(&self, run_id: u64) -> Option<&TrajectoryRecord<T>> {
        self.runs
            .binary_search_by_key(&run_id, |r| r.run_id)
            .ok()
            .map(|i| &self.runs[i])
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset<T> {
    pub instances: Vec<InstanceRuns<T>>,
    pub meta: BTreeMap<String, Value>,
}

/// How records that exceed the verifier's context window enter the metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnscoredPolicy {
    /// Drop them (instances left without runs are dropped too).
    #[default]
    Exclude,
    /// Keep them with score 0.
    ScoreZero,
}

impl std::str::FromStr for UnscoredPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exclude" => Ok(Self::Exclude),
            "zero" => Ok(Self::ScoreZero),
            other => Err(format!("unknown unscored policy '{other}' (expected exclude or zero)")),
        }
    }
}

impl<T: Real> Dataset<T> {
    /// Builds a dataset, rejecting duplicate `(instance_id, run_id)` keys.
    pub fn from_records(
        records: Vec<TrajectoryRecord<T>>,
        meta: BTreeMap<String, Value>,
    ) -> Result<Self, TrajError> {
        let mut seen = std::collections::HashSet::new();
        for r in &records {
            if !seen.insert((r.instance_id.as_str(), r.run_id)) {
                return Err(TrajError::DuplicateRecord {
                    instance_id: r.instance_id.clone(),
                    run_id: r.run_id,
                });
            }
        }
        Ok(Self {
            instances: group_by_instance(records),
            meta,
        })
    }

    pub fn records(&self) -> impl Iterator<Item = &TrajectoryRecord<T>> {
        self.instances.iter().flat_map(|i| i.runs.iter())
    }

    pub fn n_records(&self) -> usize {
        self.instances.iter().map(|i| i.len()).sum()
    }

    pub fn min_runs(&self) -> usize {
        self.instances.iter().map(|i| i.len()).min().unwrap_or(0)
    }

    pub fn max_runs(&self) -> usize {
        self.instances.iter().map(|i| i.len()).max().unwrap_or(0)
    }

    /// Flattened `(scores, resolved labels)` in dataset order.
    pub fn scores_and_labels(&self) -> (Vec<T>, Vec<bool>) {
        self.records().map(|r| (r.score, r.resolved())).unzip()
    }

    /// Applies a verifier context window: records longer than `limit`
    /// tokens count as unscored and are handled per `policy`. Records
    /// without `n_tokens` are assumed to fit.
    pub fn apply_context_limit(&self, limit: u64, policy: UnscoredPolicy) -> Result<Self, TrajError> {
        if limit == 0 {
            return Err(TrajError::ZeroContextLimit);
        }
        let fits = |r: &TrajectoryRecord<T>| r.n_tokens.is_none_or(|t| t <= limit);
        let mut instances = Vec::with_capacity(self.instances.len());
        for inst in &self.instances {
            let runs: Vec<_> = match policy {
                UnscoredPolicy::Exclude => inst.runs.iter().filter(|r| fits(r)).cloned().collect(),
                UnscoredPolicy::ScoreZero => inst
                    .runs
                    .iter()
                    .map(|r| {
                        let mut r = r.clone();
                        if !fits(&r) {
                            r.score = T::zero();
                            r.logit_yes = None;
                            r.logit_no = None;
                        }
                        r
                    })
                    .collect(),
            };
            if !runs.is_empty() {
                instances.push(InstanceRuns {
                    instance_id: inst.instance_id.clone(),
                    runs,
                });
            }
        }
        Ok(Self {
            instances,
            meta: self.meta.clone(),
        })
    }

    /// Writes the dataset back out in the line-delimited format.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        if !self.meta.is_empty() {
            let meta = Value::Object(Map::from_iter(
                [("meta".to_string(), Value::Object(Map::from_iter(self.meta.clone())))],
            ));
            writeln!(w, "{meta}")?;
        }
        for r in self.records() {
            writeln!(w, "{}", r.to_json())?;
        }
        Ok(())
    }
}

/// Partitions records by instance; runs sorted by `run_id`, instances by id.
pub fn group_by_instance<T: Real>(records: Vec<TrajectoryRecord<T>>) -> Vec<InstanceRuns<T>> {
    let mut groups: BTreeMap<String, Vec<TrajectoryRecord<T>>> = BTreeMap::new();
    for r in records {
        groups.entry(r.instance_id.clone()).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(instance_id, mut runs)| {
            runs.sort_by_key(|r| r.run_id);
            InstanceRuns { instance_id, runs }
        })
        .collect()
}

/// Fraction of records whose length fits in `context_limit` tokens.
pub fn score_rate<T: Real>(dataset: &Dataset<T>, context_limit: u64) -> Result<T, TrajError> {
    if context_limit == 0 {
        return Err(TrajError::ZeroContextLimit);
    }
    let mut fit = 0usize;
    let mut total = 0usize;
    for r in dataset.records() {
        let n = r.n_tokens.ok_or_else(|| TrajError::MissingTokens {
            instance_id: r.instance_id.clone(),
            run_id: r.run_id,
        })?;
        total += 1;
        if n <= context_limit {
            fit += 1;
        }
    }
    if total == 0 {
        return Ok(T::zero());
    }
    Ok(T::from_count(fit) / T::from_count(total))
}

#[derive(Deserialize)]
struct RawRecord {
    instance_id: String,
    run_id: u64,
    #[serde(default)]
    logit_yes: Option<f64>,
    #[serde(default)]
    logit_no: Option<f64>,
    #[serde(default)]
    score: Option<f64>,
    #[serde(default)]
    status: Option<Status>,
    #[serde(default)]
    resolved: Option<bool>,
    #[serde(default)]
    n_tokens: Option<u64>,
    #[serde(flatten)]
    extras: BTreeMap<String, Value>,
}

fn validate<T: Real>(raw: RawRecord, line: usize) -> Result<TrajectoryRecord<T>, TrajError> {
    let malformed = |msg: String| TrajError::Malformed { line, msg };
    let status = match (raw.status, raw.resolved) {
        (Some(s), None) => s,
        (None, Some(true)) => Status::Resolved,
        (None, Some(false)) => Status::Failed,
        (Some(s), Some(b)) => {
            if s.is_resolved() != b {
                return Err(malformed(format!("status '{s}' contradicts resolved={b}")));
            }
            s
        }
        (None, None) => return Err(TrajError::MissingStatus { line }),
    };

    let logits = match (raw.logit_yes, raw.logit_no) {
        (Some(y), Some(n)) => Some((y, n)),
        (None, None) => None,
        _ => return Err(malformed("logit_yes and logit_no must be given together".into())),
    };
    let implied = logits
        .map(|(y, n)| score_from_logits(T::lit(y), T::lit(n)).map_err(|e| malformed(e.to_string())))
        .transpose()?;

    if let Some(s) = raw.score {
        if !(0.0..=1.0).contains(&s) {
            return Err(TrajError::ScoreOutOfRange { line, score: s });
        }
    }
    let score = match (raw.score, implied) {
        (Some(s), Some(imp)) => {
            let imp_f = imp.to_f64().unwrap_or(f64::NAN);
            if (s - imp_f).abs() > LOGIT_SCORE_TOLERANCE {
                return Err(TrajError::LogitScoreMismatch {
                    line,
                    score: s,
                    implied: imp_f,
                });
            }
            T::lit(s)
        }
        (Some(s), None) => T::lit(s),
        (None, Some(imp)) => imp,
        (None, None) => return Err(TrajError::MissingScore { line }),
    };

    Ok(TrajectoryRecord {
        instance_id: raw.instance_id,
        run_id: raw.run_id,
        logit_yes: logits.map(|(y, _)| T::lit(y)),
        logit_no: logits.map(|(_, n)| T::lit(n)),
        score,
        status,
        n_tokens: raw.n_tokens,
        extras: raw.extras,
    })
}

/// Reads and validates a line-delimited record stream. Blank lines are
/// skipped; line numbers in errors are 1-based.
pub fn parse_records<T: Real, R: BufRead>(reader: R) -> Result<Dataset<T>, TrajError> {
    let mut records = Vec::new();
    let mut meta = BTreeMap::new();
    let mut first_seen: HashMap<(String, u64), usize> = HashMap::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| TrajError::Malformed {
            line: line_no,
            msg: e.to_string(),
        })?;
        if let Value::Object(obj) = &value {
            if obj.len() == 1 {
                if let Some(Value::Object(m)) = obj.get("meta") {
                    meta.extend(m.clone());
                    continue;
                }
            }
        }
        let raw: RawRecord = serde_json::from_value(value).map_err(|e| TrajError::Malformed {
            line: line_no,
            msg: e.to_string(),
        })?;
        let rec = validate::<T>(raw, line_no)?;
        let key = (rec.instance_id.clone(), rec.run_id);
        if let Some(&first_line) = first_seen.get(&key) {
            return Err(TrajError::DuplicateKey {
                line: line_no,
                first_line,
                instance_id: key.0,
                run_id: key.1,
            });
        }
        first_seen.insert(key, line_no);
        records.push(rec);
    }

    Ok(Dataset {
        instances: group_by_instance(records),
        meta,
    })
}

pub fn parse_str<T: Real>(s: &str) -> Result<Dataset<T>, TrajError> {
    parse_records(s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_record() {
        let ds: Dataset<f64> =
            parse_str(r#"{"instance_id":"i1","run_id":0,"score":0.5,"status":"resolved"}"#).unwrap();
        assert_eq!(ds.instances.len(), 1);
        assert_eq!(ds.instances[0].runs.len(), 1);
        assert_eq!(ds.instances[0].runs[0].status, Status::Resolved);
    }

    #[test]
    fn duplicate_key_names_line() {
        let text = "{\"instance_id\":\"i1\",\"run_id\":0,\"score\":0.5,\"status\":\"resolved\"}\n\
                    {\"instance_id\":\"i1\",\"run_id\":0,\"score\":0.2,\"status\":\"failed\"}\n";
        match parse_str::<f64>(text) {
            Err(TrajError::DuplicateKey { line, first_line, .. }) => {
                assert_eq!((line, first_line), (2, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn symmetric_logits_materialise_half() {
        let ds: Dataset<f64> = parse_str(
            r#"{"instance_id":"i1","run_id":3,"logit_yes":0.0,"logit_no":0.0,"status":"failed"}"#,
        )
        .unwrap();
        assert_eq!(ds.instances[0].runs[0].score, 0.5);
    }

    #[test]
    fn validation_errors() {
        let bad = |s: &str| parse_str::<f64>(s).unwrap_err();
        assert!(matches!(
            bad(r#"{"instance_id":"a","run_id":0,"score":1.5,"status":"failed"}"#),
            TrajError::ScoreOutOfRange { line: 1, .. }
        ));
        assert!(matches!(
            bad(r#"{"instance_id":"a","run_id":0,"status":"failed"}"#),
            TrajError::MissingScore { line: 1 }
        ));
        assert!(matches!(
            bad("\n{not json"),
            TrajError::Malformed { line: 2, .. }
        ));
        assert!(matches!(
            bad(r#"{"instance_id":"a","score":0.2,"status":"failed"}"#),
            TrajError::Malformed { .. }
        ));
        assert!(matches!(
            bad(r#"{"instance_id":"a","run_id":0,"score":0.9,"logit_yes":0.0,"logit_no":0.0,"status":"failed"}"#),
            TrajError::LogitScoreMismatch { .. }
        ));
        assert!(matches!(
            bad(r#"{"instance_id":"a","run_id":0,"score":0.9}"#),
            TrajError::MissingStatus { .. }
        ));
        assert!(matches!(
            bad(r#"{"instance_id":"a","run_id":0,"score":0.9,"status":"done"}"#),
            TrajError::Malformed { .. }
        ));
        assert!(matches!(
            bad(r#"{"instance_id":"a","run_id":0,"score":0.9,"status":"failed","resolved":true}"#),
            TrajError::Malformed { .. }
        ));
    }

    #[test]
    fn resolved_alias_extras_and_meta() {
        let text = r#"{"meta":{"source":"unit","policy":"p0"}}
{"instance_id":"b","run_id":1,"score":0.25,"resolved":false,"repo":"x/y"}
{"instance_id":"b","run_id":0,"score":0.75,"resolved":true}"#;
        let ds: Dataset<f64> = parse_str(text).unwrap();
        assert_eq!(ds.meta["source"], "unit");
        let runs = &ds.instances[0].runs;
        assert_eq!(runs[0].run_id, 0);
        assert_eq!(runs[0].status, Status::Resolved);
        assert_eq!(runs[1].status, Status::Failed);
        assert_eq!(runs[1].extras["repo"], "x/y");
    }

    #[test]
    fn consistent_logits_and_score_accepted() {
        let s = 1f64.exp() / (1f64.exp() + 1.0);
        let line = format!(
            r#"{{"instance_id":"a","run_id":0,"logit_yes":1.0,"logit_no":0.0,"score":{s},"status":"resolved"}}"#
        );
        let ds: Dataset<f64> = parse_str(&line).unwrap();
        assert_eq!(ds.instances[0].runs[0].score, s);
    }

    fn rec(id: &str, run: u64) -> TrajectoryRecord<f64> {
        TrajectoryRecord::new(id, run, 0.5, Status::Failed)
    }

    #[test]
    fn grouping() {
        let groups = group_by_instance(vec![rec("b", 1), rec("a", 1), rec("b", 0), rec("a", 0)]);
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].instance_id, "a");
        assert_eq!(groups[1].runs.iter().map(|r| r.run_id).collect::<Vec<_>>(), vec![0, 1]);
        assert!(group_by_instance::<f64>(vec![]).is_empty());
    }

    #[test]
    fn score_rate_examples() {
        let mk = |lens: &[u64]| {
            let recs = lens
                .iter()
                .enumerate()
                .map(|(i, &n)| rec("a", i as u64).with_tokens(n))
                .collect();
            Dataset::from_records(recs, BTreeMap::new()).unwrap()
        };
        assert_eq!(score_rate(&mk(&[10, 10, 10]), 16).unwrap(), 1.0);
        assert!((score_rate(&mk(&[100, 200, 300]), 200).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let ds = Dataset::from_records(vec![rec("a", 0)], BTreeMap::new()).unwrap();
        assert!(matches!(score_rate(&ds, 10), Err(TrajError::MissingTokens { .. })));
    }

    #[test]
    fn score_rate_reproduces_context_column() {
        // 1000 records whose lengths place 5 / 125 / 883 / 995 / 1000 of them
        // within 16k / 32k / 64k / 128k / 256k tokens.
        let mut lens = Vec::new();
        let counts = [5usize, 120, 758, 112, 5];
        let lengths = [10_000u64, 20_000, 50_000, 100_000, 200_000];
        for (&c, &l) in counts.iter().zip(&lengths) {
            lens.extend(std::iter::repeat_n(l, c));
        }
        let recs = lens
            .iter()
            .enumerate()
            .map(|(i, &n)| rec(&format!("i{}", i / 32), (i % 32) as u64).with_tokens(n))
            .collect();
        let ds = Dataset::from_records(recs, BTreeMap::new()).unwrap();
        let limits = [16_000u64, 32_000, 64_000, 128_000, 256_000];
        let expected = [0.005, 0.125, 0.883, 0.995, 1.0];
        for (&l, &e) in limits.iter().zip(&expected) {
            assert!((score_rate(&ds, l).unwrap() - e).abs() < 1e-12, "limit {l}");
        }
    }

    #[test]
    fn context_limit_policies() {
        let recs = vec![
            rec("a", 0).with_tokens(10),
            rec("a", 1).with_tokens(100),
            rec("b", 0).with_tokens(100),
            rec("c", 0),
        ];
        let ds = Dataset::from_records(recs, BTreeMap::new()).unwrap();
        let ex = ds.apply_context_limit(50, UnscoredPolicy::Exclude).unwrap();
        assert_eq!(ex.instances.len(), 2);
        assert_eq!(ex.n_records(), 2);
        let z = ds.apply_context_limit(50, UnscoredPolicy::ScoreZero).unwrap();
        assert_eq!(z.n_records(), 4);
        assert_eq!(z.instances[0].runs[1].score, 0.0);
        assert_eq!(z.instances[0].runs[0].score, 0.5);
    }

    type Arb = (u8, u8, f64, u8, Option<u64>, bool);

    fn arb_record() -> impl Strategy<Value = Arb> {
        (0u8..5, 0u8..6, 0.0f64..=1.0, 0u8..3, proptest::option::of(1u64..100_000), any::<bool>())
    }

    fn render(recs: &[Arb]) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        recs.iter()
            .filter(|r| seen.insert((r.0, r.1)))
            .map(|&(i, run, s, st, tok, logits)| {
                let status = ["resolved", "failed", "unfinished"][st as usize];
                let mut m = serde_json::Map::new();
                m.insert("instance_id".into(), format!("inst{i}").into());
                m.insert("run_id".into(), run.into());
                if logits {
                    m.insert("logit_yes".into(), (s * 4.0 - 2.0).into());
                    m.insert("logit_no".into(), 0.5.into());
                } else {
                    m.insert("score".into(), s.into());
                }
                m.insert("status".into(), status.into());
                if let Some(t) = tok {
                    m.insert("n_tokens".into(), t.into());
                }
                Value::Object(m).to_string()
            })
            .collect()
    }

    proptest! {
        #[test]
        fn round_trip(recs in proptest::collection::vec(arb_record(), 0..40)) {
            let text = render(&recs).join("\n");
            let ds: Dataset<f64> = parse_str(&text).unwrap();
            let mut out = Vec::new();
            ds.write_jsonl(&mut out).unwrap();
            let again: Dataset<f64> = parse_records(&out[..]).unwrap();
            prop_assert_eq!(again, ds);
        }

        #[test]
        fn order_insensitive(recs in proptest::collection::vec(arb_record(), 0..40), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut lines = render(&recs);
            let a: Dataset<f64> = parse_str(&lines.join("\n")).unwrap();
            lines.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let b: Dataset<f64> = parse_str(&lines.join("\n")).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn grouping_matches_sort_then_group(recs in proptest::collection::vec((0u8..5, 0u64..50), 0..60)) {
            let mut seen = std::collections::HashSet::new();
            let records: Vec<_> = recs.into_iter()
                .filter(|k| seen.insert(*k))
                .map(|(i, r)| rec(&format!("x{i}"), r))
                .collect();
            let mut sorted = records.clone();
            sorted.sort_by(|a, b| (&a.instance_id, a.run_id).cmp(&(&b.instance_id, b.run_id)));
            let mut oracle: Vec<InstanceRuns<f64>> = Vec::new();
            for r in sorted {
                match oracle.last_mut() {
                    Some(g) if g.instance_id == r.instance_id => g.runs.push(r),
                    _ => oracle.push(InstanceRuns { instance_id: r.instance_id.clone(), runs: vec![r] }),
                }
            }
            prop_assert_eq!(group_by_instance(records), oracle);
        }

        #[test]
        fn score_rate_monotone(lens in proptest::collection::vec(1u64..1000, 1..50), l1 in 1u64..1000, dl in 0u64..1000) {
            let recs = lens.iter().enumerate().map(|(i, &n)| rec("a", i as u64).with_tokens(n)).collect();
            let ds = Dataset::from_records(recs, BTreeMap::new()).unwrap();
            prop_assert!(score_rate(&ds, l1).unwrap() <= score_rate(&ds, l1 + dl).unwrap());
        }
    }
}
