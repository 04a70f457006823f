//! On-disk formats: Q-table snapshots, rule listings and the CSV exports.

use std::io::{Read, Write};

use fqscale_core::controller::{ExperimentLog, TickRecord};
use fqscale_core::fql::QTable;
use fqscale_core::fuzzy::{ActionSet, RuleBase};
use fqscale_core::sim::{EventRecord, Millis};
use fqscale_core::workload::WorkloadTrace;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed snapshot: {0}")]
    Snapshot(String),
    #[error("malformed trace: {0}")]
    Trace(String),
    #[error(transparent)]
    Core(#[from] fqscale_core::Error),
}

/// Q-table snapshot: one row per rule, one column per action, plus the
/// learning parameters needed to resume. Stored as TOML; floats are written
/// in shortest round-trip form, so export then import is exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QSnapshot {
    pub strategy: String,
    pub step: u64,
    pub eta: f64,
    pub gamma: f64,
    pub actions: Vec<i32>,
    pub q: Vec<Vec<f64>>,
}

impl QSnapshot {
    pub fn from_table(table: &QTable, strategy: impl Into<String>, step: u64) -> Self {
        let j = table.n_actions();
        Self {
            strategy: strategy.into(),
            step,
            eta: table.eta(),
            gamma: table.gamma(),
            actions: table.actions().as_slice().to_vec(),
            q: table.values().chunks(j).map(<[f64]>::to_vec).collect(),
        }
    }

    pub fn to_table(&self) -> Result<QTable, FormatError> {
        Ok(QTable::from_rows(self.q.clone(), ActionSet::new(self.actions.clone())?, self.eta, self.gamma)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# fqscale Q-table snapshot: rows are rules, columns follow `actions`\n");
        out.push_str(&toml::to_string(self).expect("snapshot serializes"));
        out
    }

    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let snap: Self = toml::from_str(text).map_err(|e| FormatError::Snapshot(e.to_string()))?;
        snap.to_table()?;
        Ok(snap)
    }

    /// Snapshot of the final table of a learning run, if it kept one.
    pub fn from_log(log: &ExperimentLog, rules: &RuleBase, eta: f64, gamma: f64) -> Option<Result<Self, FormatError>> {
        let q = log.final_q.as_ref()?;
        let j = rules.actions().len();
        let rows = q.chunks(j).map(<[f64]>::to_vec).collect();
        let step = log.learning.last().map_or(0, |r| r.step);
        Some(
            QTable::from_rows(rows, rules.actions().clone(), eta, gamma)
                .map(|t| Self::from_table(&t, log.strategy.clone(), step))
                .map_err(FormatError::from),
        )
    }
}

/// Greedy consequents of `snapshot` written against `rules`, one
/// `IF w IS <term> AND rt IS <term> THEN delta=<int>` line per rule.
pub fn export_rules(rules: &RuleBase, snapshot: &QSnapshot) -> Result<String, FormatError> {
    let table = snapshot.to_table()?;
    if table.n_rules() != rules.n_rules() || table.actions() != rules.actions() {
        return Err(FormatError::Snapshot(format!(
            "snapshot is {}x{} but the rule base is {}x{}",
            table.n_rules(),
            table.n_actions(),
            rules.n_rules(),
            rules.actions().len()
        )));
    }
    Ok(rules.describe(&table.extract_policy()))
}

/// Writes a trace as `t,intensity` rows with `t` in milliseconds.
pub fn write_trace_csv(trace: &WorkloadTrace, out: impl Write) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "intensity"])?;
    for &(t, x) in trace.samples() {
        w.write_record([t.to_string(), x.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `t,intensity` CSV. The sample interval is the spacing of the
/// first two samples (10 s for a single-sample file).
pub fn read_trace_csv(input: impl Read) -> Result<WorkloadTrace, FormatError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().map(str::trim).collect::<Vec<_>>() != ["t", "intensity"] {
        return Err(FormatError::Trace(format!("expected header `t,intensity`, got `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut samples: Vec<(Millis, f64)> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| FormatError::Trace(format!("row {}: bad {what}", line + 1));
        let t = rec.get(0).and_then(|s| s.trim().parse().ok()).ok_or_else(|| bad("t"))?;
        let x = rec.get(1).and_then(|s| s.trim().parse().ok()).ok_or_else(|| bad("intensity"))?;
        samples.push((t, x));
    }
    let interval = match samples.as_slice() {
        [(a, _), (b, _), ..] if b > a => b - a,
        [_, _, ..] => return Err(FormatError::Trace("sample times must be strictly increasing".into())),
        _ => 10_000,
    };
    Ok(WorkloadTrace::from_samples(samples, interval)?)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const TICK_HEADER: [&str; 10] =
    ["t", "w", "rt_ms", "th", "vm", "raw_delta", "enforced_delta", "epsilon", "reward", "dq"];

/// Per-tick CSV for plotting. Ticks without a decision or learning update
/// leave `raw_delta`, `reward` and `dq` empty.
pub fn write_tick_csv(ticks: &[TickRecord], out: impl Write) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TICK_HEADER)?;
    for t in ticks {
        w.write_record([
            t.t_ms.to_string(),
            t.w.to_string(),
            t.rt_ms.to_string(),
            t.th.to_string(),
            t.vm.to_string(),
            opt(t.raw_delta),
            t.enforced_delta.to_string(),
            t.epsilon.to_string(),
            opt(t.reward),
            opt(t.dq),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const EVENT_HEADER: [&str; 6] = ["time", "event_kind", "node_count", "queue_len", "request_id", "rt_ms"];

pub fn write_event_csv(events: &[EventRecord], out: impl Write) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EVENT_HEADER)?;
    for e in events {
        w.write_record([
            e.t_ms.to_string(),
            e.kind.as_str().to_string(),
            e.node_count.to_string(),
            e.queue_len.to_string(),
            opt(e.request_id),
            opt(e.rt_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}
