//! A frozen environment for checking what the learner converges to.
//!
//! Each rule of the default rule base is paired with a hidden operating
//! point: a constant workload intensity and a current node count. At every
//! step the environment presents the peak of a uniformly drawn rule, the
//! learner picks a delta, and the reward is the utility change the delta
//! causes at that operating point. Utilities are measured on short runs of
//! the cluster simulator at a fixed node count, with the same arrival stream
//! before and after so that only the node count differs. The next state is
//! drawn independently of the action, so the greedy policy of the fixed
//! point is the per-state argmax of the expected reward.

use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::controller::{calibrated_slo, enforce, EnforcerConfig};
use crate::error::{param, Result};
use crate::fql::{ConvergenceMonitor, ExplorationStrategy, Learner, QTable};
use crate::fuzzy::RuleBase;
use crate::reward::{self, RewardWeights, SloConfig};
use crate::rng::{self, Stream};
use crate::sim::{ClusterSim, Millis, SimConfig};
use crate::workload::{self, WorkloadTrace};

/// Hidden operating point behind one rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub intensity: f64,
    pub nodes: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryEnv {
    pub rules: RuleBase,
    pub points: Vec<OperatingPoint>,
    pub sim: SimConfig,
    pub slo: SloConfig,
    pub weights: RewardWeights,
    pub rate_scale: f64,
    pub interval_ms: Millis,
    /// Intervals simulated before measuring, letting the queue fill.
    pub warmup_intervals: u64,
    pub measure_intervals: u64,
}

/// Result of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct Training {
    pub table: QTable,
    pub policy: Vec<i32>,
    pub convergence_step: Option<u64>,
}

impl StationaryEnv {
    /// Nine operating points arranged so that low workload calls for
    /// shedding nodes, medium workload for settling on four nodes and high
    /// workload for six.
    pub fn default_scenario() -> Self {
        let rt_des_ms = 1000.0;
        let sim = SimConfig::default();
        let interval_ms = 10_000;
        let pt = |intensity, nodes| OperatingPoint { intensity, nodes };
        Self {
            rules: RuleBase::default_for(rt_des_ms, 2.0),
            points: alloc::vec![
                pt(10.0, 3),
                pt(10.0, 4),
                pt(10.0, 5),
                pt(50.0, 5),
                pt(50.0, 4),
                pt(50.0, 3),
                pt(65.0, 6),
                pt(65.0, 5),
                pt(65.0, 4),
            ],
            sim,
            slo: calibrated_slo(rt_des_ms, &sim, interval_ms),
            weights: RewardWeights::default(),
            rate_scale: 1.0,
            interval_ms,
            warmup_intervals: 3,
            measure_intervals: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.len() != self.rules.n_rules() {
            return Err(param("points", "need one operating point per rule"));
        }
        if self.points.iter().any(|p| !(0.0..=100.0).contains(&p.intensity)) {
            return Err(param("points", "intensity outside [0, 100]"));
        }
        if self.points.iter().any(|p| p.nodes < self.sim.node_min || p.nodes > self.sim.node_max) {
            return Err(param("points", "node count outside the simulator bounds"));
        }
        if self.measure_intervals == 0 || self.interval_ms == 0 {
            return Err(param("measure_intervals", "must be positive"));
        }
        self.sim.validate()?;
        self.slo.validate()
    }

    fn enforcer(&self) -> EnforcerConfig {
        EnforcerConfig { node_min: self.sim.node_min, node_max: self.sim.node_max, block_in_flight: true }
    }

    /// Node count reached from `state` after applying `delta` within bounds.
    pub fn target_nodes(&self, state: usize, delta: i32) -> u32 {
        let n0 = self.points[state].nodes;
        (i64::from(n0) + i64::from(enforce(delta, n0, &self.enforcer(), false))) as u32
    }

    /// Utility measured on one run at a fixed node count. The arrival stream
    /// is a function of `episode_seed` alone.
    pub fn episode_utility(&self, intensity: f64, nodes: u32, episode_seed: u64) -> f64 {
        let total = self.warmup_intervals + self.measure_intervals;
        let samples = (0..total).map(|k| (k * self.interval_ms, intensity)).collect();
        let trace = WorkloadTrace::from_samples(samples, self.interval_ms).expect("constant trace is valid");
        let mut arrivals_rng = rng::stream(episode_seed, Stream::Arrivals);
        let arrivals = workload::to_arrivals(&trace, self.rate_scale, &mut arrivals_rng);
        let mut sim = ClusterSim::new(SimConfig { initial_nodes: nodes, seed: episode_seed, ..self.sim })
            .expect("validated simulator config");
        sim.inject(arrivals);
        let t_warm = self.warmup_intervals * self.interval_ms;
        sim.advance(t_warm);
        let done = sim.advance(total * self.interval_ms);
        let m = self.measure_intervals as f64;
        let rt = if done.is_empty() {
            0.0
        } else {
            done.iter().map(|r| (r.completion_ms.unwrap() - r.arrival_ms) as f64).sum::<f64>() / done.len() as f64
        };
        reward::utility_of(done.len() as f64 / m, f64::from(nodes), rt, &self.weights, &self.slo)
    }

    /// One noisy reward sample for `delta` in `state`.
    pub fn sample_reward(&self, state: usize, delta: i32, episode_seed: u64) -> f64 {
        let p = self.points[state];
        let after = self.target_nodes(state, delta);
        if after == p.nodes {
            return 0.0;
        }
        reward::reward(
            self.episode_utility(p.intensity, after, episode_seed),
            self.episode_utility(p.intensity, p.nodes, episode_seed),
        )
    }

    /// Trains a learner for `steps` learning steps from `table`.
    pub fn train(
        &self,
        table: QTable,
        strategy: ExplorationStrategy,
        monitor: ConvergenceMonitor,
        steps: u64,
        seed: u64,
    ) -> Result<Training> {
        self.validate()?;
        strategy.validate()?;
        let n = self.rules.n_rules();
        let mut learner = Learner::new(table, strategy, monitor);
        let mut agent_rng = rng::stream(seed, Stream::Agent);
        let mut env_rng = rng::stream(seed, Stream::Environment);
        let firing_of = |i: usize| self.rules.fuzzify(&self.rules.rule_peak(i));
        let mut state = env_rng.random_range(0..n);
        let mut firing = firing_of(state);
        for _ in 0..steps {
            let decision = learner.decide(&firing, &mut agent_rng);
            let r = self.sample_reward(state, decision.raw_delta, env_rng.next_u64());
            let next = env_rng.random_range(0..n);
            let firing_next = firing_of(next);
            learner.learn(&decision.chosen, r, &firing_next);
            state = next;
            firing = firing_next;
        }
        let policy = learner.table.extract_policy();
        Ok(Training { convergence_step: learner.monitor.converged_at(), policy, table: learner.table })
    }
}
