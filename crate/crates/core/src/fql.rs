//! Fuzzy Q-learning over the consequents of a [`RuleBase`](crate::fuzzy::RuleBase).
//!
//! One q-value is kept per (rule, action) cell. At every decision each fired
//! rule picks an action epsilon-greedily; the controller output is the
//! firing-weighted average of those actions and the state-action value is
//! the firing-weighted average of the chosen cells. The TD error is spread
//! back over the chosen cells in proportion to each rule's firing level.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::error::{param, Error, Result};
use crate::fuzzy::{ActionSet, FiringVector};

pub const DEFAULT_ETA: f64 = 0.1;
pub const DEFAULT_GAMMA: f64 = 0.8;
pub const DEFAULT_TOLERANCE: f64 = 1e-3;
pub const DEFAULT_WINDOW: u32 = 10;
/// Constant exploration rate of S3.
pub const DEFAULT_S3_EPSILON: f64 = 0.5;
/// Learning steps after which S1/S2 leave the initial exploration phase even
/// if no convergence was detected.
pub const DEFAULT_EXPLORATION_HORIZON: u64 = 150;

/// `N x J` table of q-values plus learning parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    q: Vec<f64>,
    n_rules: usize,
    actions: ActionSet,
    eta: f64,
    gamma: f64,
}

impl QTable {
    /// Zero-initialized table.
    pub fn new(n_rules: usize, actions: ActionSet, eta: f64, gamma: f64) -> Result<Self> {
        if n_rules == 0 {
            return Err(param("rules", "need at least one rule"));
        }
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(param("fql.eta", format!("{eta} not in (0, 1]")));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(param("fql.gamma", format!("{gamma} not in [0, 1)")));
        }
        let q = alloc::vec![0.0; n_rules * actions.len()];
        Ok(Self { q, n_rules, actions, eta, gamma })
    }

    /// Table with explicit rows, e.g. from a snapshot.
    pub fn from_rows(rows: Vec<Vec<f64>>, actions: ActionSet, eta: f64, gamma: f64) -> Result<Self> {
        let mut table = Self::new(rows.len(), actions, eta, gamma)?;
        let j = table.n_actions();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != j {
                return Err(Error::IndexOutOfRange(format!("row {i} has {} cells, expected {j}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(param("q", format!("row {i} has a non-finite value")));
            }
            table.q[i * j..(i + 1) * j].copy_from_slice(row);
        }
        Ok(table)
    }

    pub fn n_rules(&self) -> usize {
        self.n_rules
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    /// Number of stored q-values.
    pub fn cells(&self) -> usize {
        self.q.len()
    }

    pub fn actions(&self) -> &ActionSet {
        &self.actions
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn get(&self, rule: usize, action: usize) -> f64 {
        self.q[rule * self.n_actions() + action]
    }

    pub fn row(&self, rule: usize) -> &[f64] {
        let j = self.n_actions();
        &self.q[rule * j..(rule + 1) * j]
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }

    pub fn max_abs(&self) -> f64 {
        self.q.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn row_max(&self, rule: usize) -> f64 {
        self.row(rule).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn greedy<R: Rng + ?Sized>(&self, rule: usize, rng: &mut R) -> usize {
        let row = self.row(rule);
        let best = self.row_max(rule);
        let ties = row.iter().filter(|&&v| v == best).count();
        let pick = if ties == 1 { 0 } else { rng.random_range(0..ties) };
        row.iter().enumerate().filter(|&(_, &v)| v == best).nth(pick).map(|(k, _)| k).unwrap()
    }

    fn first_greedy(&self, rule: usize) -> usize {
        let best = self.row_max(rule);
        self.row(rule).iter().position(|&v| v == best).unwrap()
    }

    /// Epsilon-greedy choice of one action per rule.
    ///
    /// Fired rules explore independently with probability `epsilon`; greedy
    /// ties are broken uniformly at random. Rules that did not fire take the
    /// first greedy action without consuming randomness.
    pub fn select_actions<R: Rng + ?Sized>(&self, firing: &FiringVector, epsilon: f64, rng: &mut R) -> ChosenActions {
        debug_assert_eq!(firing.len(), self.n_rules);
        let j = self.n_actions();
        let actions = firing
            .degrees()
            .iter()
            .enumerate()
            .map(|(i, &alpha)| {
                if alpha <= 0.0 {
                    self.first_greedy(i)
                } else if epsilon > 0.0 && rng.random::<f64>() < epsilon {
                    rng.random_range(0..j)
                } else {
                    self.greedy(i, rng)
                }
            })
            .collect();
        ChosenActions { actions, firing: firing.clone() }
    }

    /// `Q(s, a) = sum_i alpha_i * q[i, a_i]`.
    pub fn q_of(&self, chosen: &ChosenActions) -> f64 {
        chosen.firing.fired().map(|(i, alpha)| alpha * self.get(i, chosen.actions[i])).sum()
    }

    /// `V(s') = sum_i alpha_i(s') * max_k q[i, k]`.
    pub fn value_of(&self, firing_next: &FiringVector) -> f64 {
        firing_next.fired().map(|(i, alpha)| alpha * self.row_max(i)).sum()
    }

    /// One TD step; touches only the chosen cells of fired rules.
    pub fn update(&mut self, chosen: &ChosenActions, reward: f64, firing_next: &FiringVector) -> TdUpdate {
        let delta_q = reward + self.gamma * self.value_of(firing_next) - self.q_of(chosen);
        let j = self.n_actions();
        let scale = self.eta * delta_q;
        let mut max_change: f64 = 0.0;
        for (i, alpha) in chosen.firing.fired() {
            let change = scale * alpha;
            self.q[i * j + chosen.actions[i]] += change;
            max_change = max_change.max(change.abs());
        }
        TdUpdate { delta_q, max_change }
    }

    /// Consequent of every rule: the action with the highest q-value, ties
    /// going to the smallest `|delta|` and then to the smaller delta.
    pub fn extract_policy(&self) -> Vec<i32> {
        (0..self.n_rules)
            .map(|i| {
                let best = self.row_max(i);
                self.row(i)
                    .iter()
                    .zip(self.actions.as_slice())
                    .filter(|&(&v, _)| v == best)
                    .map(|(_, &d)| d)
                    .min_by_key(|&d| (d.unsigned_abs(), d))
                    .unwrap()
            })
            .collect()
    }

    /// Overwrites the listed `(rule, action, prior)` cells; nothing changes if
    /// any index is out of range.
    pub fn seed_knowledge(&mut self, priors: &[(usize, usize, f64)]) -> Result<()> {
        let j = self.n_actions();
        if let Some(&(i, k, _)) = priors.iter().find(|&&(i, k, _)| i >= self.n_rules || k >= j) {
            return Err(Error::IndexOutOfRange(format!(
                "cell ({i}, {k}) outside {} x {j} table",
                self.n_rules
            )));
        }
        if priors.iter().any(|p| !p.2.is_finite()) {
            return Err(param("priors", "prior q-values must be finite"));
        }
        for &(i, k, v) in priors {
            self.q[i * j + k] = v;
        }
        Ok(())
    }

    /// Seeds one cell per rule from a crisp rule base: the listed consequent
    /// delta gets `prior`.
    pub fn seed_rules(&mut self, consequents: &[i32], prior: f64) -> Result<()> {
        if consequents.len() != self.n_rules {
            return Err(Error::IndexOutOfRange(format!(
                "{} consequents for {} rules",
                consequents.len(),
                self.n_rules
            )));
        }
        let mut priors = Vec::with_capacity(consequents.len());
        for (i, &d) in consequents.iter().enumerate() {
            let k = self.actions.index_of(d).ok_or_else(|| param("rules", format!("delta {d} not in action set")))?;
            priors.push((i, k, prior));
        }
        self.seed_knowledge(&priors)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdUpdate {
    pub delta_q: f64,
    /// Largest absolute change applied to a single cell, `eta * |dQ| * max alpha`.
    pub max_change: f64,
}

/// Per-rule action indices plus the firing levels they were chosen under.
#[derive(Debug, Clone, PartialEq)]
pub struct ChosenActions {
    pub actions: Vec<usize>,
    pub firing: FiringVector,
}

impl ChosenActions {
    /// Consequent values for defuzzification.
    pub fn consequents(&self, set: &ActionSet) -> Vec<f64> {
        self.actions.iter().map(|&k| f64::from(set.delta(k))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum StrategyKind {
    /// Full exploration, then `epsilon = 0.2` after the first convergence.
    S1,
    /// Full exploration, then pure exploitation.
    S2,
    /// Constant high exploration.
    S3,
    /// Always random.
    S4,
    /// Fixed rule base, no learning.
    S5,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [Self::S1, Self::S2, Self::S3, Self::S4, Self::S5];

    pub fn learns(self) -> bool {
        self != Self::S5
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::S1 => "S1",
            Self::S2 => "S2",
            Self::S3 => "S3",
            Self::S4 => "S4",
            Self::S5 => "S5",
        };
        f.write_str(s)
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "S1" => Ok(Self::S1),
            "S2" => Ok(Self::S2),
            "S3" => Ok(Self::S3),
            "S4" => Ok(Self::S4),
            "S5" => Ok(Self::S5),
            _ => Err(Error::Unknown { kind: "strategy", name: s.into() }),
        }
    }
}

/// Exploration schedule: `initial_epsilon` until the first convergence (or
/// until `exploration_horizon` learning steps have elapsed), then
/// `post_convergence_epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExplorationStrategy {
    pub kind: StrategyKind,
    pub initial_epsilon: f64,
    pub post_convergence_epsilon: f64,
    pub exploration_horizon: Option<u64>,
}

impl ExplorationStrategy {
    pub fn preset(kind: StrategyKind) -> Self {
        let (initial, post, horizon) = match kind {
            StrategyKind::S1 => (1.0, 0.2, Some(DEFAULT_EXPLORATION_HORIZON)),
            StrategyKind::S2 => (1.0, 0.0, Some(DEFAULT_EXPLORATION_HORIZON)),
            StrategyKind::S3 => (DEFAULT_S3_EPSILON, DEFAULT_S3_EPSILON, None),
            StrategyKind::S4 => (1.0, 1.0, None),
            StrategyKind::S5 => (0.0, 0.0, None),
        };
        Self { kind, initial_epsilon: initial, post_convergence_epsilon: post, exploration_horizon: horizon }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |e: f64| (0.0..=1.0).contains(&e);
        if !ok(self.initial_epsilon) || !ok(self.post_convergence_epsilon) {
            return Err(param("strategy", "epsilon values must lie in [0, 1]"));
        }
        if self.kind == StrategyKind::S5 && (self.initial_epsilon != 0.0 || self.post_convergence_epsilon != 0.0) {
            return Err(param("strategy", "S5 runs a fixed rule base with epsilon 0"));
        }
        Ok(())
    }

    pub fn learns(&self) -> bool {
        self.kind.learns()
    }

    /// Whether the initial exploration phase is over at `step`.
    pub fn exploration_done(&self, step: u64, monitor: &ConvergenceMonitor) -> bool {
        monitor.converged_at().is_some() || self.exploration_horizon.is_some_and(|h| step >= h)
    }
}

/// Exploration rate for the next decision, `step` being the number of
/// learning steps performed so far.
pub fn epsilon_schedule(strategy: &ExplorationStrategy, step: u64, monitor: &ConvergenceMonitor) -> f64 {
    if !strategy.learns() {
        0.0
    } else if strategy.exploration_done(step, monitor) {
        strategy.post_convergence_epsilon
    } else {
        strategy.initial_epsilon
    }
}

/// Declares convergence once the largest per-step cell change stays below
/// `tolerance` for `window` consecutive learning steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceMonitor {
    tolerance: f64,
    window: u32,
    streak: u32,
    converged_at: Option<u64>,
}

impl Default for ConvergenceMonitor {
    fn default() -> Self {
        Self::new(DEFAULT_TOLERANCE, DEFAULT_WINDOW)
    }
}

impl ConvergenceMonitor {
    pub fn new(tolerance: f64, window: u32) -> Self {
        Self { tolerance, window: window.max(1), streak: 0, converged_at: None }
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn window(&self) -> u32 {
        self.window
    }

    pub fn converged_at(&self) -> Option<u64> {
        self.converged_at
    }

    /// Feeds the largest cell change of learning step `step` (1-based).
    /// Returns whether the criterion holds at this step.
    pub fn check(&mut self, max_change: f64, step: u64) -> bool {
        if max_change < self.tolerance {
            self.streak += 1;
        } else {
            self.streak = 0;
        }
        let holds = self.streak >= self.window;
        if holds && self.converged_at.is_none() {
            self.converged_at = Some(step);
        }
        holds
    }
}

/// What one learning step did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningOutcome {
    pub step: u64,
    pub delta_q: f64,
    pub max_change: f64,
    pub converged: bool,
}

/// Q-table together with its exploration schedule and convergence state.
#[derive(Debug, Clone)]
pub struct Learner {
    pub table: QTable,
    pub strategy: ExplorationStrategy,
    pub monitor: ConvergenceMonitor,
    steps: u64,
}

/// One decision of a [`Learner`].
#[derive(Debug, Clone)]
pub struct Decision {
    pub chosen: ChosenActions,
    pub q: f64,
    pub raw_delta: i32,
    pub epsilon: f64,
}

impl Learner {
    pub fn new(table: QTable, strategy: ExplorationStrategy, monitor: ConvergenceMonitor) -> Self {
        Self { table, strategy, monitor, steps: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn epsilon(&self) -> f64 {
        epsilon_schedule(&self.strategy, self.steps, &self.monitor)
    }

    pub fn decide<R: Rng + ?Sized>(&self, firing: &FiringVector, rng: &mut R) -> Decision {
        let epsilon = self.epsilon();
        let chosen = self.table.select_actions(firing, epsilon, rng);
        let q = self.table.q_of(&chosen);
        let raw_delta = crate::fuzzy::defuzzify(firing, &chosen.consequents(self.table.actions()));
        Decision { chosen, q, raw_delta, epsilon }
    }

    /// Applies one TD update; `None` when the strategy does not learn.
    pub fn learn(&mut self, chosen: &ChosenActions, reward: f64, firing_next: &FiringVector) -> Option<LearningOutcome> {
        if !self.strategy.learns() {
            return None;
        }
        let td = self.table.update(chosen, reward, firing_next);
        self.steps += 1;
        let converged = self.monitor.check(td.max_change, self.steps);
        Some(LearningOutcome { step: self.steps, delta_q: td.delta_q, max_change: td.max_change, converged })
    }
}
