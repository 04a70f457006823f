//! Experiment configuration: a TOML file plus `FQSCALE_` environment
//! overrides, validated and lowered onto the core run configuration.
//!
//! Any key can be overridden from the environment. The variable name is the
//! key path upper-cased with `__` between levels, so `slo.rt_des_ms` becomes
//! `FQSCALE_SLO__RT_DES_MS`. Values are parsed as TOML values and fall back
//! to plain strings, so `FQSCALE_STRATEGIES='["S1","azure"]'` and
//! `FQSCALE_WORKLOAD__PATTERN=big_spike` both work.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fqscale_core::baseline::ThresholdConfig;
use fqscale_core::controller::{calibrated_slo, ControllerConfig, EnforcerConfig, PolicyKind, RunConfig, HAND_RULES};
use fqscale_core::fql::{ExplorationStrategy, StrategyKind};
use fqscale_core::fuzzy::{ActionSet, FuzzyPartition, FuzzySet, RuleBase, Shape};
use fqscale_core::reward::{RewardWeights, SloConfig};
use fqscale_core::sim::{DelayModel, Millis, ServiceModel, SimConfig};
use fqscale_core::workload::{self, Pattern, WorkloadParams, WorkloadTrace};
use serde::{Deserialize, Serialize};

use crate::formats;

/// Prefix of environment variables that override config keys.
pub const ENV_PREFIX: &str = "FQSCALE_";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] fqscale_core::Error),
}

/// A decision maker selectable from the command line or the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StrategyChoice {
    Fuzzy(StrategyKind),
    /// Reactive threshold baseline.
    Azure,
}

impl StrategyChoice {
    pub const ALL: [StrategyChoice; 6] = [
        Self::Fuzzy(StrategyKind::S1),
        Self::Fuzzy(StrategyKind::S2),
        Self::Fuzzy(StrategyKind::S3),
        Self::Fuzzy(StrategyKind::S4),
        Self::Fuzzy(StrategyKind::S5),
        Self::Azure,
    ];

    /// Whether runs of this choice update a Q-table.
    pub fn learns(self) -> bool {
        matches!(self, Self::Fuzzy(k) if k.learns())
    }
}

impl fmt::Display for StrategyChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fuzzy(k) => write!(f, "{k}"),
            Self::Azure => f.write_str("azure"),
        }
    }
}

impl FromStr for StrategyChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.trim().eq_ignore_ascii_case("azure") {
            return Ok(Self::Azure);
        }
        s.parse::<StrategyKind>().map(Self::Fuzzy).map_err(|_| format!("unknown strategy `{s}` (S1..S5 or azure)"))
    }
}

impl TryFrom<String> for StrategyChoice {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<StrategyChoice> for String {
    fn from(c: StrategyChoice) -> String {
        c.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSection {
    /// Single pattern; takes precedence over `patterns` when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pattern: Option<Pattern>,
    pub patterns: Vec<Pattern>,
    pub duration_s: u64,
    /// Added to every run seed when generating traces.
    pub seed: u64,
    /// Mean arrivals per sample interval per unit of intensity.
    pub rate_scale: f64,
    /// Replay this `t,intensity` CSV instead of generating traces.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_csv: Option<PathBuf>,
    pub params: WorkloadParams,
}

impl Default for WorkloadSection {
    fn default() -> Self {
        Self {
            pattern: None,
            patterns: Pattern::ALL.to_vec(),
            duration_s: 24 * 3600,
            seed: 0,
            rate_scale: 0.5,
            trace_csv: None,
            params: WorkloadParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SloSection {
    pub rt_des_ms: f64,
    /// Throughput normalizer; derived from the cluster when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub th_max: Option<f64>,
    /// Node normalizer; must equal `sim.node_max` when given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vm_max: Option<u32>,
}

impl Default for SloSection {
    fn default() -> Self {
        Self { rt_des_ms: 1000.0, th_max: None, vm_max: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelaysSection {
    pub scale_out_ms: [Millis; 2],
    pub scale_in_ms: [Millis; 2],
}

impl Default for DelaysSection {
    fn default() -> Self {
        let d = DelayModel::default();
        Self {
            scale_out_ms: [d.scale_out_ms.0, d.scale_out_ms.1],
            scale_in_ms: [d.scale_in_ms.0, d.scale_in_ms.1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceSection {
    pub base_ms: f64,
    pub per_unit_ms: f64,
}

impl Default for ServiceSection {
    fn default() -> Self {
        let s = ServiceModel::default();
        Self { base_ms: s.base_ms, per_unit_ms: s.per_unit_ms }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub node_min: u32,
    pub node_max: u32,
    pub initial_nodes: u32,
    /// Added to every run seed for the simulator's delay stream.
    pub seed: u64,
    pub delays: DelaysSection,
    pub service: ServiceSection,
}

impl Default for SimSection {
    fn default() -> Self {
        let s = SimConfig::default();
        Self {
            node_min: s.node_min,
            node_max: s.node_max,
            initial_nodes: s.initial_nodes,
            seed: 0,
            delays: DelaysSection::default(),
            service: ServiceSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FqlSection {
    pub eta: f64,
    pub gamma: f64,
    pub convergence_tolerance: f64,
    pub convergence_window: u32,
    pub s1_epsilon_after: f64,
    pub s3_epsilon: f64,
    /// Learning steps after which S1/S2 stop full exploration even without
    /// convergence; 0 disables the horizon.
    pub exploration_horizon: u64,
}

impl Default for FqlSection {
    fn default() -> Self {
        let s1 = ExplorationStrategy::preset(StrategyKind::S1);
        let s3 = ExplorationStrategy::preset(StrategyKind::S3);
        Self {
            eta: fqscale_core::fql::DEFAULT_ETA,
            gamma: fqscale_core::fql::DEFAULT_GAMMA,
            convergence_tolerance: fqscale_core::fql::DEFAULT_TOLERANCE,
            convergence_window: fqscale_core::fql::DEFAULT_WINDOW,
            s1_epsilon_after: s1.post_convergence_epsilon,
            s3_epsilon: s3.initial_epsilon,
            exploration_horizon: s1.exploration_horizon.unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    pub interval_ms: Millis,
    pub settle_intervals: u32,
    pub block_in_flight: bool,
    /// Consequents of the S5 rule base, one per rule.
    pub fixed_rules: Vec<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<u64>,
}

impl Default for ControllerSection {
    fn default() -> Self {
        Self {
            interval_ms: 10_000,
            settle_intervals: 1,
            block_in_flight: true,
            fixed_rules: HAND_RULES.to_vec(),
            snapshot_every: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    pub hi_ms: f64,
    pub lo_ms: f64,
    pub window: usize,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self { hi_ms: 1000.0, lo_ms: 500.0, window: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetSection {
    pub name: String,
    /// `triangle` or `trapezoid`.
    pub shape: String,
    pub points: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    /// `w` or `rt`; the controller feeds them in this order.
    pub name: String,
    /// Defaults to the span of the sets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<[f64; 2]>,
    pub sets: Vec<SetSection>,
}

/// Explicit rule base. When absent the default 3 x 3 base is used with the
/// workload sets stretched over the reachable arrival counts and the
/// response-time sets over `[0, 4 * rt_des]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuzzySection {
    pub inputs: Vec<InputSection>,
    pub actions: Vec<i32>,
}

impl FuzzySection {
    pub fn rule_base(&self) -> Result<RuleBase, ConfigError> {
        let names: Vec<&str> = self.inputs.iter().map(|i| i.name.as_str()).collect();
        if names != ["w", "rt"] {
            return Err(ConfigError::Invalid(format!("fuzzy.inputs must be [w, rt], got {names:?}")));
        }
        let mut partitions = Vec::with_capacity(self.inputs.len());
        for input in &self.inputs {
            let sets = input
                .sets
                .iter()
                .map(|s| FuzzySet::new(s.name.clone(), Shape::from_points(&s.shape, &s.points)?))
                .collect::<fqscale_core::Result<Vec<_>>>()?;
            let domain = match input.domain {
                Some([lo, hi]) => (lo, hi),
                None => {
                    let lo = sets.iter().map(|s| s.shape.corners().0).fold(f64::INFINITY, f64::min);
                    let hi = sets.iter().map(|s| s.shape.corners().3).fold(f64::NEG_INFINITY, f64::max);
                    (lo, hi)
                }
            };
            partitions.push(FuzzyPartition::new(input.name.clone(), domain, sets)?);
        }
        Ok(RuleBase::full_product(partitions, ActionSet::new(self.actions.clone())?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub strategies: Vec<StrategyChoice>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    /// Parallel grid cells; 0 uses every available core.
    pub workers: usize,
    /// Write each run's full log (JSON) and tick CSV under `out_dir`.
    pub archive_logs: bool,
    /// Include the simulator's per-event log in archived runs.
    pub event_log: bool,
    pub workload: WorkloadSection,
    pub slo: SloSection,
    pub reward: RewardWeights,
    pub sim: SimSection,
    pub fql: FqlSection,
    pub controller: ControllerSection,
    pub baseline: BaselineSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fuzzy: Option<FuzzySection>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            strategies: StrategyChoice::ALL.to_vec(),
            seeds: (0..20).collect(),
            out_dir: PathBuf::from("out"),
            workers: 0,
            archive_logs: true,
            event_log: false,
            workload: WorkloadSection::default(),
            slo: SloSection::default(),
            reward: RewardWeights::default(),
            sim: SimSection::default(),
            fql: FqlSection::default(),
            controller: ControllerSection::default(),
            baseline: BaselineSection::default(),
            fuzzy: None,
        }
    }
}

/// Parses a `a..b` (exclusive), `a..=b` or comma-separated seed list.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let num = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("bad seed `{t}`: {e}"));
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = s.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        s.split(',').map(num).collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(format!("seed range `{s}` is empty"));
    }
    Ok(seeds)
}

/// Applies `FQSCALE_` overrides from `vars` onto a parsed TOML table.
pub fn apply_env_overrides(
    table: &mut toml::Table,
    vars: impl IntoIterator<Item = (String, String)>,
) -> Result<(), ConfigError> {
    for (name, raw) in vars {
        let Some(path) = name.strip_prefix(ENV_PREFIX) else { continue };
        let keys: Vec<String> = path.split("__").map(str::to_ascii_lowercase).collect();
        if keys.iter().any(String::is_empty) {
            return Err(ConfigError::Invalid(format!("malformed override variable `{name}`")));
        }
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.clone()));
        let (last, parents) = keys.split_last().expect("nonempty key path");
        let mut node = &mut *table;
        for key in parents {
            let entry = node.entry(key.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            node = entry
                .as_table_mut()
                .ok_or_else(|| ConfigError::Invalid(format!("`{name}` descends into non-table key `{key}`")))?;
        }
        node.insert(last.clone(), value);
    }
    Ok(())
}

impl ExperimentConfig {
    /// Reads `path`, applies overrides from the process environment and
    /// validates.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_with_env(&text, std::env::vars())
    }

    pub fn from_toml_with_env(
        text: &str,
        vars: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, ConfigError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        apply_env_overrides(&mut table, vars)?;
        let cfg: Self = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Patterns of the grid, honoring the single-pattern key.
    pub fn patterns(&self) -> Vec<Pattern> {
        match self.workload.pattern {
            Some(p) => vec![p],
            None => self.workload.patterns.clone(),
        }
    }

    pub fn duration_ms(&self) -> Millis {
        self.workload.duration_s * 1000
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.strategies.is_empty() {
            return invalid("strategies is empty");
        }
        if self.seeds.is_empty() {
            return invalid("seeds is empty");
        }
        if self.patterns().is_empty() && self.workload.trace_csv.is_none() {
            return invalid("workload.patterns is empty");
        }
        if self.workload.duration_s == 0 && self.workload.trace_csv.is_none() {
            return invalid("workload.duration_s must be positive");
        }
        self.workload.params.validate()?;
        if let Some(vm_max) = self.slo.vm_max {
            if vm_max != self.sim.node_max {
                return invalid("slo.vm_max must equal sim.node_max");
            }
        }
        let rules = self.rule_base()?;
        if self.controller.fixed_rules.len() != rules.n_rules() {
            return Err(ConfigError::Invalid(format!(
                "controller.fixed_rules has {} entries for {} rules",
                self.controller.fixed_rules.len(),
                rules.n_rules()
            )));
        }
        for &c in &self.strategies {
            self.run_config(c)?.validate()?;
        }
        Ok(())
    }

    pub fn sim_config(&self) -> SimConfig {
        let s = &self.sim;
        SimConfig {
            node_min: s.node_min,
            node_max: s.node_max,
            initial_nodes: s.initial_nodes,
            delays: DelayModel {
                scale_out_ms: (s.delays.scale_out_ms[0], s.delays.scale_out_ms[1]),
                scale_in_ms: (s.delays.scale_in_ms[0], s.delays.scale_in_ms[1]),
            },
            service: ServiceModel { base_ms: s.service.base_ms, per_unit_ms: s.service.per_unit_ms },
            seed: s.seed,
        }
    }

    pub fn slo_config(&self) -> SloConfig {
        let sim = self.sim_config();
        let derived = calibrated_slo(self.slo.rt_des_ms, &sim, self.controller.interval_ms);
        SloConfig {
            rt_des_ms: self.slo.rt_des_ms,
            th_max: self.slo.th_max.unwrap_or(derived.th_max),
            vm_max: self.slo.vm_max.unwrap_or(sim.node_max),
        }
    }

    pub fn rule_base(&self) -> Result<RuleBase, ConfigError> {
        match &self.fuzzy {
            Some(f) => f.rule_base(),
            None if !(self.workload.rate_scale.is_finite() && self.workload.rate_scale > 0.0) => {
                Err(ConfigError::Invalid("workload.rate_scale must be positive".into()))
            }
            None if !(self.slo.rt_des_ms.is_finite() && self.slo.rt_des_ms > 0.0) => {
                Err(ConfigError::Invalid("slo.rt_des_ms must be positive".into()))
            }
            None => Ok(RuleBase::scaled_for(
                workload::MAX_INTENSITY * self.workload.rate_scale,
                self.slo.rt_des_ms,
                2.0,
            )),
        }
    }

    pub fn policy(&self, choice: StrategyChoice) -> PolicyKind {
        match choice {
            StrategyChoice::Azure => PolicyKind::Threshold(ThresholdConfig {
                hi_ms: self.baseline.hi_ms,
                lo_ms: self.baseline.lo_ms,
                window: self.baseline.window,
            }),
            StrategyChoice::Fuzzy(kind) => {
                let mut s = ExplorationStrategy::preset(kind);
                match kind {
                    StrategyKind::S1 => s.post_convergence_epsilon = self.fql.s1_epsilon_after,
                    StrategyKind::S3 => {
                        s.initial_epsilon = self.fql.s3_epsilon;
                        s.post_convergence_epsilon = self.fql.s3_epsilon;
                    }
                    _ => {}
                }
                if matches!(kind, StrategyKind::S1 | StrategyKind::S2) {
                    s.exploration_horizon = (self.fql.exploration_horizon > 0).then_some(self.fql.exploration_horizon);
                }
                PolicyKind::Fuzzy(s)
            }
        }
    }

    pub fn run_config(&self, choice: StrategyChoice) -> Result<RunConfig, ConfigError> {
        let sim = self.sim_config();
        let c = &self.controller;
        let mut controller = ControllerConfig::new(self.policy(choice), self.slo_config());
        controller.control_interval_ms = c.interval_ms;
        controller.settle_intervals = c.settle_intervals;
        controller.eta = self.fql.eta;
        controller.gamma = self.fql.gamma;
        controller.convergence_tolerance = self.fql.convergence_tolerance;
        controller.convergence_window = self.fql.convergence_window;
        controller.weights = self.reward;
        controller.enforcer =
            EnforcerConfig { node_min: sim.node_min, node_max: sim.node_max, block_in_flight: c.block_in_flight };
        controller.fixed_rules = c.fixed_rules.clone();
        controller.snapshot_every = c.snapshot_every;
        Ok(RunConfig {
            controller,
            rules: self.rule_base()?,
            sim,
            rate_scale: self.workload.rate_scale,
            record_events: self.event_log,
        })
    }

    /// The workload of one run: the configured CSV, or the synthetic pattern
    /// generated from `workload.seed + seed`.
    pub fn trace(&self, pattern: Pattern, seed: u64) -> Result<WorkloadTrace, ConfigError> {
        if let Some(path) = &self.workload.trace_csv {
            let file = std::fs::File::open(path).map_err(|source| ConfigError::Io { path: path.clone(), source })?;
            return formats::read_trace_csv(file).map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())));
        }
        Ok(workload::generate(pattern, self.duration_ms(), self.workload.seed.wrapping_add(seed), &self.workload.params)?)
    }

    /// Seed handed to the controller and simulator of run `seed`.
    pub fn run_seed(&self, seed: u64) -> u64 {
        self.sim.seed.wrapping_add(seed)
    }
}
