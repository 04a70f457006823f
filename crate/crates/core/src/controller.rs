//! The monitor / analyze / plan / execute loop over a simulated cluster.
//!
//! Every control interval the controller reads an [`Observation`], resolves
//! the outstanding feedback if its effect has had time to show, and, when the
//! cluster is stable, decides a new delta. Actions are paired with the
//! utility seen when they were issued so that each learning step is rewarded
//! with exactly the utility change its own action produced.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::baseline::{ThresholdConfig, ThresholdRule};
use crate::error::{param, Error, Result};
use crate::fql::{
    ChosenActions, ConvergenceMonitor, ExplorationStrategy, Learner, QTable, StrategyKind, DEFAULT_ETA,
    DEFAULT_GAMMA, DEFAULT_TOLERANCE, DEFAULT_WINDOW,
};
use crate::fuzzy::RuleBase;
use crate::reward::{self, RewardWeights, SloConfig};
use crate::rng::{self, SimRng, Stream};
use crate::sim::{ClusterSim, EventRecord, Millis, Observation, Request, SimConfig};
use crate::workload::{self, WorkloadTrace};

/// Hand-written rule base used by S5, indexed like [`RuleBase`] rules:
/// rows are workload low/medium/high, columns response time good/ok/bad.
pub const HAND_RULES: [i32; 9] = [-1, 0, 1, 0, 1, 2, 0, 1, 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnforcerConfig {
    pub node_min: u32,
    pub node_max: u32,
    /// Refuse new actions while a change is in flight.
    pub block_in_flight: bool,
}

impl Default for EnforcerConfig {
    fn default() -> Self {
        Self { node_min: 1, node_max: 7, block_in_flight: true }
    }
}

impl EnforcerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.node_min == 0 || self.node_min > self.node_max {
            return Err(param("enforcer", "need 1 <= node_min <= node_max"));
        }
        Ok(())
    }
}

/// Keeps the resulting node count within bounds and blocks while unstable.
pub fn enforce(desired_delta: i32, current_nodes: u32, cfg: &EnforcerConfig, in_flight: bool) -> i32 {
    if in_flight && cfg.block_in_flight {
        return 0;
    }
    let current = i64::from(current_nodes);
    let target = (current + i64::from(desired_delta)).clamp(i64::from(cfg.node_min), i64::from(cfg.node_max));
    (target - current) as i32
}

/// Which decision maker drives the loop.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PolicyKind {
    /// Fuzzy controller with learned (or, for S5, fixed) consequents.
    Fuzzy(ExplorationStrategy),
    /// Reactive response-time thresholds.
    Threshold(ThresholdConfig),
}

impl PolicyKind {
    pub fn label(&self) -> String {
        match self {
            PolicyKind::Fuzzy(s) => alloc::format!("{}", s.kind),
            PolicyKind::Threshold(_) => "azure".into(),
        }
    }

    pub fn learns(&self) -> bool {
        matches!(self, PolicyKind::Fuzzy(s) if s.learns())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub control_interval_ms: Millis,
    /// Intervals to wait after enactment before the reward is read.
    pub settle_intervals: u32,
    pub eta: f64,
    pub gamma: f64,
    pub convergence_tolerance: f64,
    pub convergence_window: u32,
    pub policy: PolicyKind,
    pub weights: RewardWeights,
    pub slo: SloConfig,
    pub enforcer: EnforcerConfig,
    /// Consequents of the fixed rule base run by S5.
    pub fixed_rules: Vec<i32>,
    /// Prior q-values `(rule, action, value)` for learning strategies.
    pub priors: Vec<(usize, usize, f64)>,
    /// Learning-step cadence of Q-table snapshots in the log.
    pub snapshot_every: Option<u64>,
}

impl ControllerConfig {
    pub fn new(policy: PolicyKind, slo: SloConfig) -> Self {
        Self {
            control_interval_ms: 10_000,
            settle_intervals: 1,
            eta: DEFAULT_ETA,
            gamma: DEFAULT_GAMMA,
            convergence_tolerance: DEFAULT_TOLERANCE,
            convergence_window: DEFAULT_WINDOW,
            policy,
            weights: RewardWeights::default(),
            slo,
            enforcer: EnforcerConfig { node_max: slo.vm_max, ..EnforcerConfig::default() },
            fixed_rules: HAND_RULES.to_vec(),
            priors: Vec::new(),
            snapshot_every: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.control_interval_ms == 0 {
            return Err(param("controller.interval_ms", "must be positive"));
        }
        self.weights.validate()?;
        self.slo.validate()?;
        self.enforcer.validate()?;
        if self.slo.vm_max != self.enforcer.node_max {
            return Err(param("slo.vm_max", "must equal the enforcer's node_max"));
        }
        match &self.policy {
            PolicyKind::Fuzzy(s) => s.validate(),
            PolicyKind::Threshold(t) => t.validate(),
        }
    }
}

/// An issued action waiting for its effect to be observed.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingFeedback {
    pub chosen: Option<ChosenActions>,
    pub q_at_selection: f64,
    pub delta: i32,
    pub issued_at: Millis,
    pub issued_tick: usize,
    /// Set once the change is live; immediately for a zero delta.
    pub enacted_at: Option<Millis>,
    pub utility_before: f64,
    resolved: bool,
}

impl PendingFeedback {
    pub fn is_resolved(&self) -> bool {
        self.resolved
    }

    fn ready(&self, now: Millis, settle_ms: Millis) -> bool {
        self.enacted_at.is_some_and(|e| now >= e + settle_ms)
    }
}

/// One monitoring interval as seen by the controller.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TickRecord {
    pub t_ms: Millis,
    pub w: u64,
    pub rt_ms: f64,
    pub rt_p95_ms: f64,
    pub th: u64,
    pub vm: u32,
    pub utility: f64,
    /// Controller output before enforcement; `None` when no decision was made.
    pub raw_delta: Option<i32>,
    pub enforced_delta: i32,
    pub epsilon: f64,
    pub reward: Option<f64>,
    pub dq: Option<f64>,
}

/// One Q-learning step and the action it rewarded.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LearningRecord {
    pub step: u64,
    pub issued_tick: usize,
    pub resolved_tick: usize,
    pub delta: i32,
    pub utility_before: f64,
    pub utility_after: f64,
    pub reward: f64,
    pub delta_q: f64,
    pub max_change: f64,
}

/// Everything needed to recompute the run's metrics.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExperimentLog {
    pub strategy: String,
    pub pattern: String,
    pub seed: u64,
    pub interval_ms: Millis,
    pub duration_ms: Millis,
    pub ticks: Vec<TickRecord>,
    pub learning: Vec<LearningRecord>,
    /// Exact per-request response times, as `ms -> count`.
    pub response_times: BTreeMap<u64, u64>,
    pub node_timeline: Vec<(Millis, u32)>,
    pub convergence_step: Option<u64>,
    pub snapshots: Vec<(u64, Vec<f64>)>,
    pub final_q: Option<Vec<f64>>,
    pub policy: Option<Vec<i32>>,
    /// Issue time of feedback still open when the run ended.
    pub discarded_feedback: Option<Millis>,
    pub max_in_flight: u32,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Vec::is_empty"))]
    pub events: Vec<EventRecord>,
}

enum Brain {
    Fuzzy { rules: RuleBase, learner: Learner },
    Threshold(ThresholdRule),
}

pub struct Controller {
    cfg: ControllerConfig,
    brain: Brain,
    pending: Option<PendingFeedback>,
    rng: SimRng,
    ticks: usize,
    learning: Vec<LearningRecord>,
    snapshots: Vec<(u64, Vec<f64>)>,
}

impl Controller {
    pub fn new(cfg: ControllerConfig, rules: RuleBase, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let brain = match &cfg.policy {
            PolicyKind::Fuzzy(strategy) => {
                let mut table = QTable::new(rules.n_rules(), rules.actions().clone(), cfg.eta, cfg.gamma)?;
                if strategy.learns() {
                    table.seed_knowledge(&cfg.priors)?;
                } else {
                    table.seed_rules(&cfg.fixed_rules, 1.0)?;
                }
                let monitor = ConvergenceMonitor::new(cfg.convergence_tolerance, cfg.convergence_window);
                Brain::Fuzzy { rules, learner: Learner::new(table, *strategy, monitor) }
            }
            PolicyKind::Threshold(t) => Brain::Threshold(ThresholdRule::new(*t)?),
        };
        Ok(Self {
            cfg,
            brain,
            pending: None,
            rng: rng::stream(seed, Stream::Agent),
            ticks: 0,
            learning: Vec::new(),
            snapshots: Vec::new(),
        })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn pending(&self) -> Option<&PendingFeedback> {
        self.pending.as_ref()
    }

    pub fn learner(&self) -> Option<&Learner> {
        match &self.brain {
            Brain::Fuzzy { learner, .. } => Some(learner),
            Brain::Threshold(_) => None,
        }
    }

    pub fn learning_records(&self) -> &[LearningRecord] {
        &self.learning
    }

    fn epsilon(&self) -> f64 {
        self.learner().map_or(0.0, Learner::epsilon)
    }

    /// One control interval.
    pub fn tick(&mut self, obs: &Observation, sim: &mut ClusterSim) -> Result<TickRecord> {
        let now = obs.t_ms;
        let tick = self.ticks;
        self.ticks += 1;
        let utility = reward::utility(obs, &self.cfg.weights, &self.cfg.slo);
        if let Brain::Threshold(rule) = &mut self.brain {
            rule.observe(obs);
        }
        let mut rec = TickRecord {
            t_ms: now,
            w: obs.w,
            rt_ms: obs.rt_mean_ms,
            rt_p95_ms: obs.rt_p95_ms,
            th: obs.th,
            vm: obs.vm,
            utility,
            raw_delta: None,
            enforced_delta: 0,
            epsilon: self.epsilon(),
            reward: None,
            dq: None,
        };

        let settle_ms = Millis::from(self.cfg.settle_intervals) * self.cfg.control_interval_ms;
        if let Some(pf) = self.pending.as_mut() {
            if pf.enacted_at.is_none() && !sim.in_flight() {
                pf.enacted_at = sim.last_enactment().map(|(t, _)| t);
            }
            if pf.ready(now, settle_ms) {
                let mut pf = self.pending.take().unwrap();
                if let Some(l) = self.resolve_feedback(&mut pf, obs, utility, tick)? {
                    rec.reward = Some(l.reward);
                    rec.dq = Some(l.delta_q);
                }
            }
        }
        rec.epsilon = self.epsilon();

        // Stable mode: no decision while an action's effect is outstanding.
        if self.pending.is_some() || sim.in_flight() {
            return Ok(rec);
        }

        let nodes = sim.active_nodes();
        let (raw, chosen, q) = match &mut self.brain {
            Brain::Fuzzy { rules, learner } => {
                let firing = rules.fuzzify(&[obs.w as f64, obs.rt_mean_ms]);
                let d = learner.decide(&firing, &mut self.rng);
                (d.raw_delta, Some(d.chosen), d.q)
            }
            Brain::Threshold(rule) => (rule.decide(), None, 0.0),
        };
        let enforced = enforce(raw, nodes, &self.cfg.enforcer, sim.in_flight());
        if enforced != 0 {
            sim.schedule_scaling(enforced, now)?;
        }
        rec.raw_delta = Some(raw);
        rec.enforced_delta = enforced;
        self.pending = Some(PendingFeedback {
            chosen,
            q_at_selection: q,
            delta: enforced,
            issued_at: now,
            issued_tick: tick,
            enacted_at: (enforced == 0).then_some(now),
            utility_before: utility,
            resolved: false,
        });
        Ok(rec)
    }

    /// Rewards the pending action with the utility change since it was
    /// issued and runs one learning step on the state observed now.
    pub fn resolve_feedback(
        &mut self,
        pf: &mut PendingFeedback,
        obs_after: &Observation,
        utility_after: f64,
        tick: usize,
    ) -> Result<Option<LearningRecord>> {
        if pf.resolved {
            return Err(Error::FeedbackResolved);
        }
        pf.resolved = true;
        let r = reward::reward(utility_after, pf.utility_before);
        let (Brain::Fuzzy { rules, learner }, Some(chosen)) = (&mut self.brain, pf.chosen.as_ref()) else {
            return Ok(None);
        };
        debug_assert!((learner.table.q_of(chosen) - pf.q_at_selection).abs() < 1e-12);
        let firing_next = rules.fuzzify(&[obs_after.w as f64, obs_after.rt_mean_ms]);
        let Some(outcome) = learner.learn(chosen, r, &firing_next) else {
            return Ok(None);
        };
        let record = LearningRecord {
            step: outcome.step,
            issued_tick: pf.issued_tick,
            resolved_tick: tick,
            delta: pf.delta,
            utility_before: pf.utility_before,
            utility_after,
            reward: r,
            delta_q: outcome.delta_q,
            max_change: outcome.max_change,
        };
        self.learning.push(record);
        if self.cfg.snapshot_every.is_some_and(|k| k > 0 && outcome.step % k == 0) {
            self.snapshots.push((outcome.step, learner.table.values().to_vec()));
        }
        Ok(Some(record))
    }
}

/// Complete description of one simulated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub controller: ControllerConfig,
    pub rules: RuleBase,
    pub sim: SimConfig,
    /// Mean arrivals per sample interval per unit of intensity.
    pub rate_scale: f64,
    /// Keep the simulator's per-event log in [`ExperimentLog::events`].
    pub record_events: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.controller.validate()?;
        self.sim.validate()?;
        if self.sim.node_min != self.controller.enforcer.node_min || self.sim.node_max != self.controller.enforcer.node_max
        {
            return Err(param("sim.node_max", "simulator and enforcer bounds differ"));
        }
        if !(self.rate_scale.is_finite() && self.rate_scale >= 0.0) {
            return Err(param("workload.rate_scale", "must be nonnegative"));
        }
        Ok(())
    }
}

/// Drives the loop over the whole trace. Deterministic in `(cfg, trace, seed)`.
pub fn run(cfg: &RunConfig, trace: &WorkloadTrace, seed: u64) -> Result<ExperimentLog> {
    cfg.validate()?;
    let interval = cfg.controller.control_interval_ms;
    let mut sim = ClusterSim::new(SimConfig { seed, ..cfg.sim })?;
    if cfg.record_events {
        sim = sim.with_event_log();
    }
    let mut controller = Controller::new(cfg.controller.clone(), cfg.rules.clone(), seed)?;
    let mut arrival_rng = rng::stream(seed, Stream::Arrivals);
    let arrivals = workload::to_arrivals(trace, cfg.rate_scale, &mut arrival_rng);

    let mut log = ExperimentLog {
        strategy: cfg.controller.policy.label(),
        pattern: trace.pattern.map_or_else(|| "trace".into(), |p| p.as_str().into()),
        seed,
        interval_ms: interval,
        duration_ms: (trace.duration_ms() / interval) * interval,
        ..ExperimentLog::default()
    };
    let n_ticks = trace.duration_ms() / interval;
    let mut next = 0;
    for k in 1..=n_ticks {
        let t1 = k * interval;
        let end = next + arrivals[next..].partition_point(|r: &Request| r.arrival_ms < t1);
        sim.inject(arrivals[next..end].iter().copied());
        next = end;
        for r in sim.advance(t1) {
            let rt = r.completion_ms.unwrap() - r.arrival_ms;
            *log.response_times.entry(rt).or_insert(0) += 1;
        }
        let obs = sim.observe();
        let rec = controller.tick(&obs, &mut sim)?;
        log.max_in_flight = log.max_in_flight.max(u32::from(sim.in_flight()));
        log.ticks.push(rec);
    }

    log.node_timeline = sim.node_timeline().to_vec();
    log.events = sim.event_log().map(<[_]>::to_vec).unwrap_or_default();
    log.discarded_feedback = controller.pending().map(|p| p.issued_at);
    log.learning = core::mem::take(&mut controller.learning);
    log.snapshots = core::mem::take(&mut controller.snapshots);
    if let Some(l) = controller.learner() {
        if l.strategy.learns() {
            log.convergence_step = l.monitor.converged_at();
        }
        log.final_q = Some(l.table.values().to_vec());
        log.policy = Some(l.table.extract_policy());
    }
    Ok(log)
}

/// Mean arrivals per sample interval per unit of intensity in the default
/// experiment. At this rate the largest intensity needs about five of the
/// seven nodes.
pub const DEFAULT_RATE_SCALE: f64 = 0.5;

/// Default experiment for `policy`: the default delays and node bounds, the
/// workload partition stretched over the arrival counts the default rate can
/// produce, and the throughput normalizer of [`calibrated_slo`].
pub fn default_run_config(policy: PolicyKind, rt_des_ms: f64) -> RunConfig {
    let sim = SimConfig::default();
    let rate_scale = DEFAULT_RATE_SCALE;
    let slo = calibrated_slo(rt_des_ms, &sim, 10_000);
    RunConfig {
        controller: ControllerConfig::new(policy, slo),
        rules: RuleBase::scaled_for(100.0 * rate_scale, rt_des_ms, 2.0),
        sim,
        rate_scale,
        record_events: false,
    }
}

/// SLO whose throughput normalizer is the completion count per interval that
/// `node_max` nodes sustain on the largest requests. With this scale one more
/// node on a saturated cluster is worth at least as much throughput utility
/// as it costs in the node term, so scaling out of an overload is rewarded.
pub fn calibrated_slo(rt_des_ms: f64, sim: &SimConfig, interval_ms: Millis) -> SloConfig {
    let largest = crate::workload::MAX_INTENSITY as u32;
    let th_max = f64::from(sim.node_max) * sim.service.node_rate(largest, interval_ms);
    SloConfig { rt_des_ms, th_max, vm_max: sim.node_max }
}

pub fn strategy_policy(kind: StrategyKind) -> PolicyKind {
    PolicyKind::Fuzzy(ExplorationStrategy::preset(kind))
}
