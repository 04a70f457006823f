//! Grid runner, per-run metrics and report emission.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use fqscale_core::controller::{self, ExperimentLog};
use fqscale_core::stats;
use fqscale_core::workload::Pattern;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, ExperimentConfig, StrategyChoice};
use crate::formats::{self, FormatError, QSnapshot};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] fqscale_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("no experiment logs found in {0}")]
    NoLogs(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

/// Metrics of one seeded run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    /// Nearest-rank 95th percentile over every completed request; 0 when
    /// nothing completed.
    pub rt_p95_ms: f64,
    /// Time-weighted average of active nodes.
    pub mean_vm: f64,
    /// Sum of absolute enforced deltas.
    pub node_changes: u64,
    /// Ticks with a nonzero enforced delta.
    pub nonzero_actions: u64,
    pub convergence_step: Option<u64>,
    pub learning_steps: u64,
    /// Sum of per-tick utilities.
    pub cumulative_utility: f64,
}

/// Nearest-rank percentile of an integer histogram `value -> count`.
pub fn histogram_percentile(hist: &BTreeMap<u64, u64>, p_percent: u64) -> Option<u64> {
    let n: u64 = hist.values().sum();
    if n == 0 {
        return None;
    }
    let rank = (p_percent * n).div_ceil(100).max(1);
    let mut seen = 0;
    for (&v, &c) in hist {
        seen += c;
        if seen >= rank {
            return Some(v);
        }
    }
    unreachable!("rank never exceeds the sample count")
}

/// Time-weighted mean of a step function `(t, value)` over `[0, end)`.
pub fn time_weighted_mean(timeline: &[(u64, u32)], end: u64) -> f64 {
    if end == 0 || timeline.is_empty() {
        return timeline.first().map_or(0.0, |&(_, v)| f64::from(v));
    }
    let mut area = 0.0;
    for (k, &(t, v)) in timeline.iter().enumerate() {
        if t >= end {
            break;
        }
        let until = timeline.get(k + 1).map_or(end, |&(t1, _)| t1.min(end));
        area += f64::from(v) * (until - t) as f64;
    }
    area / end as f64
}

pub fn compute_metrics(log: &ExperimentLog) -> Result<RunMetrics, fqscale_core::Error> {
    if log.ticks.is_empty() {
        return Err(fqscale_core::Error::EmptyLog);
    }
    Ok(RunMetrics {
        seed: log.seed,
        rt_p95_ms: histogram_percentile(&log.response_times, 95).map_or(0.0, |v| v as f64),
        mean_vm: time_weighted_mean(&log.node_timeline, log.duration_ms),
        node_changes: log.ticks.iter().map(|t| u64::from(t.enforced_delta.unsigned_abs())).sum(),
        nonzero_actions: log.ticks.iter().filter(|t| t.enforced_delta != 0).count() as u64,
        convergence_step: log.convergence_step,
        learning_steps: log.learning.len() as u64,
        cumulative_utility: log.ticks.iter().map(|t| t.utility).sum(),
    })
}

/// Aggregate of one (strategy, pattern) cell across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub strategy: String,
    pub pattern: String,
    pub rt_p95_ms: f64,
    pub mean_vm: f64,
    pub node_changes: f64,
    pub nonzero_actions: f64,
    /// Median convergence step counting unconverged runs as never
    /// converging; absent when at least half the runs did not converge.
    pub convergence_step: Option<f64>,
    pub converged_runs: usize,
    pub cumulative_utility: f64,
    pub per_seed: Vec<RunMetrics>,
    /// Seeds whose run failed, with the reason.
    pub failures: Vec<(u64, String)>,
}

/// Median with `None` ordered after every value.
fn median_converged(steps: &[Option<u64>]) -> Option<f64> {
    if steps.is_empty() {
        return None;
    }
    let mut s: Vec<Option<u64>> = steps.to_vec();
    s.sort_by_key(|v| v.unwrap_or(u64::MAX));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2].map(|v| v as f64)
    } else {
        Some(0.5 * (s[n / 2 - 1]? as f64 + s[n / 2]? as f64))
    }
}

impl ExperimentReport {
    pub fn aggregate(
        strategy: impl Into<String>,
        pattern: impl Into<String>,
        mut per_seed: Vec<RunMetrics>,
        mut failures: Vec<(u64, String)>,
    ) -> Self {
        per_seed.sort_by_key(|m| m.seed);
        failures.sort();
        let med = |f: fn(&RunMetrics) -> f64| {
            stats::median(&per_seed.iter().map(f).collect::<Vec<_>>()).unwrap_or(f64::NAN)
        };
        let steps: Vec<Option<u64>> = per_seed.iter().map(|m| m.convergence_step).collect();
        Self {
            strategy: strategy.into(),
            pattern: pattern.into(),
            rt_p95_ms: med(|m| m.rt_p95_ms),
            mean_vm: med(|m| m.mean_vm),
            node_changes: med(|m| m.node_changes as f64),
            nonzero_actions: med(|m| m.nonzero_actions as f64),
            convergence_step: median_converged(&steps),
            converged_runs: steps.iter().flatten().count(),
            cumulative_utility: med(|m| m.cumulative_utility),
            per_seed,
            failures,
        }
    }
}

/// Sort key placing strategies S1..S5 before the baseline and patterns in
/// their canonical order; unrecognized labels sort last by name.
#[allow(clippy::type_complexity)]
fn report_key(r: &ExperimentReport) -> (bool, Option<StrategyChoice>, bool, Option<Pattern>, String, String) {
    let s = r.strategy.parse::<StrategyChoice>().ok();
    let p = r.pattern.parse::<Pattern>().ok();
    (s.is_none(), s, p.is_none(), p, r.strategy.clone(), r.pattern.clone())
}

fn sort_reports(reports: &mut [ExperimentReport]) {
    reports.sort_by_cached_key(report_key);
}

/// Successful metrics and failures per report cell.
type Grouped<K> = BTreeMap<K, (Vec<RunMetrics>, Vec<(u64, String)>)>;

/// One simulated experiment.
pub fn run_cell(
    cfg: &ExperimentConfig,
    strategy: StrategyChoice,
    pattern: Pattern,
    seed: u64,
) -> Result<ExperimentLog, HarnessError> {
    let run_cfg = cfg.run_config(strategy)?;
    let trace = cfg.trace(pattern, seed)?;
    let mut log = controller::run(&run_cfg, &trace, cfg.run_seed(seed))?;
    // Keep the grid seed rather than the derived one so reports line up
    // with the configured seed list.
    log.seed = seed;
    Ok(log)
}

/// File stem of an archived run.
pub fn log_stem(strategy: &str, pattern: &str, seed: u64) -> String {
    format!("{strategy}_{pattern}_{seed}")
}

/// Writes the full log (JSON), its tick CSV, the final Q snapshot of
/// learning runs and the event CSV when events were recorded.
pub fn archive_log(cfg: &ExperimentConfig, log: &ExperimentLog, dir: &Path) -> Result<(), HarnessError> {
    let stem = log_stem(&log.strategy, &log.pattern, log.seed);
    let logs = dir.join("logs");
    let ticks = dir.join("ticks");
    fs::create_dir_all(&logs).map_err(io_err(&logs))?;
    fs::create_dir_all(&ticks).map_err(io_err(&ticks))?;

    let path = logs.join(format!("{stem}.json"));
    let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
    serde_json::to_writer(&mut w, log).map_err(|source| HarnessError::Json { path: path.clone(), source })?;
    w.flush().map_err(io_err(&path))?;

    let path = ticks.join(format!("{stem}.csv"));
    formats::write_tick_csv(&log.ticks, BufWriter::new(File::create(&path).map_err(io_err(&path))?))?;

    if let Some(snap) = QSnapshot::from_log(log, &cfg.rule_base()?, cfg.fql.eta, cfg.fql.gamma) {
        let dir = dir.join("snapshots");
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let path = dir.join(format!("{stem}.toml"));
        fs::write(&path, snap?.to_text()).map_err(io_err(&path))?;
    }
    if !log.events.is_empty() {
        let dir = dir.join("events");
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let path = dir.join(format!("{stem}.csv"));
        formats::write_event_csv(&log.events, BufWriter::new(File::create(&path).map_err(io_err(&path))?))?;
    }
    Ok(())
}

/// Runs every (strategy, pattern, seed) cell of `cfg` on `cfg.workers`
/// threads and aggregates medians per (strategy, pattern). A failing run is
/// recorded in its report and the grid carries on. With `archive` set, each
/// run is written under that directory as it completes.
pub fn run_grid(cfg: &ExperimentConfig, archive: Option<&Path>) -> Result<Vec<ExperimentReport>, HarnessError> {
    cfg.validate()?;
    let cells: Vec<(StrategyChoice, Pattern, u64)> = cfg
        .strategies
        .iter()
        .flat_map(|&s| cfg.patterns().into_iter().flat_map(move |p| cfg.seeds.iter().map(move |&seed| (s, p, seed))))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .expect("thread pool with a valid thread count");
    let results: Vec<(StrategyChoice, Pattern, u64, Result<RunMetrics, String>)> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(s, p, seed)| {
                let outcome = run_cell(cfg, s, p, seed).and_then(|log| {
                    if let Some(dir) = archive {
                        archive_log(cfg, &log, dir)?;
                    }
                    Ok(compute_metrics(&log)?)
                });
                (s, p, seed, outcome.map_err(|e| e.to_string()))
            })
            .collect()
    });

    let pattern_label = |p: Pattern| if cfg.workload.trace_csv.is_some() { "trace".to_string() } else { p.to_string() };
    let mut grouped: Grouped<(StrategyChoice, Pattern)> = BTreeMap::new();
    for (s, p, seed, outcome) in results {
        let entry = grouped.entry((s, p)).or_default();
        match outcome {
            Ok(m) => entry.0.push(m),
            Err(e) => entry.1.push((seed, e)),
        }
    }
    let mut reports: Vec<ExperimentReport> = grouped
        .into_iter()
        .map(|((s, p), (metrics, failures))| ExperimentReport::aggregate(s.to_string(), pattern_label(p), metrics, failures))
        .collect();
    sort_reports(&mut reports);
    Ok(reports)
}

/// Recomputes reports from the JSON logs in `dir` (or `dir/logs`).
pub fn reports_from_logs(dir: &Path) -> Result<Vec<ExperimentReport>, HarnessError> {
    let logs_dir = if dir.join("logs").is_dir() { dir.join("logs") } else { dir.to_path_buf() };
    let mut paths: Vec<PathBuf> = fs::read_dir(&logs_dir)
        .map_err(io_err(&logs_dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(HarnessError::NoLogs(logs_dir));
    }
    let mut grouped: Grouped<(String, String)> = BTreeMap::new();
    for path in paths {
        let file = File::open(&path).map_err(io_err(&path))?;
        let log: ExperimentLog = serde_json::from_reader(std::io::BufReader::new(file))
            .map_err(|source| HarnessError::Json { path: path.clone(), source })?;
        let entry = grouped.entry((log.strategy.clone(), log.pattern.clone())).or_default();
        match compute_metrics(&log) {
            Ok(m) => entry.0.push(m),
            Err(e) => entry.1.push((log.seed, e.to_string())),
        }
    }
    let mut reports: Vec<ExperimentReport> = grouped
        .into_iter()
        .map(|((s, p), (metrics, failures))| ExperimentReport::aggregate(s, p, metrics, failures))
        .collect();
    sort_reports(&mut reports);
    Ok(reports)
}

pub const TABLE_COLUMNS: [&str; 8] =
    ["strategy", "pattern", "rt_p95", "mean_vm", "node_changes", "convergence", "nonzero_actions", "cum_utility"];

fn convergence_cell(r: &ExperimentReport) -> String {
    r.convergence_step.map_or_else(|| "N/A".to_string(), |s| format!("{s}"))
}

/// Median table as CSV, one row per (strategy, pattern).
pub fn results_csv(reports: &[ExperimentReport]) -> Result<Vec<u8>, FormatError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "strategy", "pattern", "rt_p95_ms", "mean_vm", "node_changes", "convergence_step", "nonzero_actions",
        "cumulative_utility", "converged_runs", "runs", "failed_runs",
    ])?;
    for r in reports {
        w.write_record([
            r.strategy.clone(),
            r.pattern.clone(),
            r.rt_p95_ms.to_string(),
            r.mean_vm.to_string(),
            r.node_changes.to_string(),
            r.convergence_step.map(|s| s.to_string()).unwrap_or_default(),
            r.nonzero_actions.to_string(),
            r.cumulative_utility.to_string(),
            r.converged_runs.to_string(),
            r.per_seed.len().to_string(),
            r.failures.len().to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| FormatError::Io(e.into_error()))
}

/// Every seeded run as CSV.
pub fn per_seed_csv(reports: &[ExperimentReport]) -> Result<Vec<u8>, FormatError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "strategy", "pattern", "seed", "rt_p95_ms", "mean_vm", "node_changes", "nonzero_actions",
        "convergence_step", "learning_steps", "cumulative_utility",
    ])?;
    for r in reports {
        for m in &r.per_seed {
            w.write_record([
                r.strategy.clone(),
                r.pattern.clone(),
                m.seed.to_string(),
                m.rt_p95_ms.to_string(),
                m.mean_vm.to_string(),
                m.node_changes.to_string(),
                m.nonzero_actions.to_string(),
                m.convergence_step.map(|s| s.to_string()).unwrap_or_default(),
                m.learning_steps.to_string(),
                m.cumulative_utility.to_string(),
            ])?;
        }
    }
    w.into_inner().map_err(|e| FormatError::Io(e.into_error()))
}

/// Plain-text comparison table with aligned columns.
pub fn text_table(reports: &[ExperimentReport]) -> String {
    let rows: Vec<[String; 8]> = reports
        .iter()
        .map(|r| {
            [
                r.strategy.clone(),
                r.pattern.clone(),
                format!("{:.0}ms", r.rt_p95_ms),
                format!("{:.2}", r.mean_vm),
                format!("{}", r.node_changes),
                convergence_cell(r),
                format!("{}", r.nonzero_actions),
                format!("{:.1}", r.cumulative_utility),
            ]
        })
        .collect();
    let mut widths = TABLE_COLUMNS.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[String]| {
        let padded: Vec<String> = cells.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
        out.push_str(padded.join("  ").trim_end());
        out.push('\n');
    };
    line(&TABLE_COLUMNS.map(String::from));
    for row in &rows {
        line(row);
    }
    out
}

#[derive(Serialize)]
struct Summary<'a> {
    config: Option<&'a ExperimentConfig>,
    reports: &'a [ExperimentReport],
}

/// Writes `results.csv`, `per_seed.csv`, `summary.json` and `table.txt`
/// into `dir`. Output bytes depend only on the inputs.
pub fn emit(reports: &[ExperimentReport], cfg: Option<&ExperimentConfig>, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let summary = serde_json::to_vec_pretty(&Summary { config: cfg, reports })
        .map_err(|source| HarnessError::Json { path: dir.join("summary.json"), source })?;
    let files = [
        ("results.csv", results_csv(reports)?),
        ("per_seed.csv", per_seed_csv(reports)?),
        ("summary.json", summary),
        ("table.txt", text_table(reports).into_bytes()),
    ];
    let mut written = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}
