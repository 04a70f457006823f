//! Type-1 fuzzy inference with crisp (zero-order Sugeno) rule consequents.
//!
//! Each monitored signal is covered by a [`FuzzyPartition`] whose sets sum to
//! one everywhere on the domain. Rules enumerate the Cartesian product of the
//! input sets; a rule's firing level is the product of its antecedent
//! memberships, so firing levels also sum to one and the controller output is
//! a true weighted average of the rule consequents.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::error::{Error, Result};

/// Tolerance used when validating the partition-of-unity property.
const RUSPINI_TOL: f64 = 1e-9;

/// Piecewise-linear membership shape, breakpoints in domain units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Triangular(f64, f64, f64),
    Trapezoidal(f64, f64, f64, f64),
}

impl Shape {
    /// Breakpoints as a trapezoid `(a, b, c, d)`; a triangle has `b == c`.
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        match *self {
            Shape::Triangular(a, b, c) => (a, b, b, c),
            Shape::Trapezoidal(a, b, c, d) => (a, b, c, d),
        }
    }

    pub fn from_points(kind: &str, points: &[f64]) -> Result<Self> {
        let shape = match (kind, points) {
            ("triangular" | "triangle", &[a, b, c]) => Shape::Triangular(a, b, c),
            ("trapezoidal" | "trapezoid", &[a, b, c, d]) => Shape::Trapezoidal(a, b, c, d),
            _ => {
                return Err(Error::InvalidShape(format!(
                    "`{kind}` with {} points",
                    points.len()
                )))
            }
        };
        shape.validate()?;
        Ok(shape)
    }

    fn validate(&self) -> Result<()> {
        let (a, b, c, d) = self.corners();
        let finite = [a, b, c, d].iter().all(|v| v.is_finite());
        if !finite || a > b || b > c || c > d {
            return Err(Error::InvalidShape(format!("{self:?}: breakpoints must be finite and nondecreasing")));
        }
        Ok(())
    }

    /// Center of the plateau (the peak for a triangle).
    pub fn peak(&self) -> f64 {
        let (_, b, c, _) = self.corners();
        0.5 * (b + c)
    }

    pub fn membership(&self, x: f64) -> f64 {
        let (a, b, c, d) = self.corners();
        if x < a || x > d {
            0.0
        } else if x >= b && x <= c {
            1.0
        } else if x < b {
            (x - a) / (b - a)
        } else {
            (d - x) / (d - c)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzySet {
    pub name: String,
    pub shape: Shape,
}

impl FuzzySet {
    pub fn new(name: impl Into<String>, shape: Shape) -> Result<Self> {
        shape.validate()?;
        Ok(Self { name: name.into(), shape })
    }

    pub fn membership(&self, x: f64) -> f64 {
        self.shape.membership(x)
    }
}

/// Degree of membership of `x` in `set`.
pub fn membership(set: &FuzzySet, x: f64) -> f64 {
    set.membership(x)
}

/// Linguistic sets covering one input signal.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyPartition {
    label: String,
    sets: Vec<FuzzySet>,
    domain: (f64, f64),
}

impl FuzzyPartition {
    /// Builds a partition, checking that every set lies inside `domain`,
    /// that sets are ordered by peak and that memberships sum to one
    /// everywhere on the domain.
    pub fn new(label: impl Into<String>, domain: (f64, f64), sets: Vec<FuzzySet>) -> Result<Self> {
        let label = label.into();
        let fail = |reason: String| Error::InvalidPartition { label: label.clone(), reason };
        let (lo, hi) = domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(fail(format!("bad domain [{lo}, {hi}]")));
        }
        if sets.is_empty() {
            return Err(fail("no sets".to_string()));
        }
        for set in &sets {
            set.shape.validate()?;
            let (a, _, _, d) = set.shape.corners();
            if a < lo || d > hi {
                return Err(fail(format!("set `{}` leaves the domain", set.name)));
            }
        }
        if sets.windows(2).any(|w| w[0].shape.peak() >= w[1].shape.peak()) {
            return Err(fail("sets are not ordered by peak".to_string()));
        }

        // The membership sum is linear between consecutive breakpoints, so it
        // is enough to check each breakpoint and two interior points per piece.
        let mut knots: Vec<f64> = sets
            .iter()
            .flat_map(|s| {
                let (a, b, c, d) = s.shape.corners();
                [a, b, c, d]
            })
            .chain([lo, hi])
            .collect();
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let total = |x: f64| sets.iter().map(|s| s.membership(x)).sum::<f64>();
        let mut probes = knots.clone();
        for w in knots.windows(2) {
            probes.push(w[0] + (w[1] - w[0]) / 3.0);
            probes.push(w[0] + 2.0 * (w[1] - w[0]) / 3.0);
        }
        if let Some(x) = probes.into_iter().find(|&x| libm::fabs(total(x) - 1.0) > RUSPINI_TOL) {
            return Err(fail(format!("memberships sum to {} at x = {x}", total(x))));
        }
        Ok(Self { label, sets, domain })
    }

    /// Default workload partition over `[0, 100]` requests per interval.
    pub fn workload_default() -> Self {
        Self::workload(100.0)
    }

    /// The default workload breakpoints stretched over `[0, w_max]` requests
    /// per interval.
    pub fn workload(w_max: f64) -> Self {
        Self::scaled("w", w_max, ["low", "medium", "high"])
    }

    /// Response-time partition over `[0, 2 * rt_des * k]` milliseconds, using
    /// the same relative breakpoints as the workload partition.
    pub fn response_time_default(rt_des_ms: f64, k: f64) -> Self {
        Self::scaled("rt", 2.0 * rt_des_ms * k, ["good", "ok", "bad"])
    }

    fn scaled(label: &str, span: f64, names: [&str; 3]) -> Self {
        let p = |f: f64| f * span;
        let sets = alloc::vec![
            FuzzySet { name: names[0].into(), shape: Shape::Trapezoidal(0.0, 0.0, p(0.2), p(0.5)) },
            FuzzySet { name: names[1].into(), shape: Shape::Triangular(p(0.2), p(0.5), p(0.8)) },
            FuzzySet { name: names[2].into(), shape: Shape::Trapezoidal(p(0.5), p(0.8), span, span) },
        ];
        Self::new(label, (0.0, span), sets).expect("default partition is valid")
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn sets(&self) -> &[FuzzySet] {
        &self.sets
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.domain.0, self.domain.1)
    }

    /// Membership of the clamped input in every set, in set order.
    pub fn memberships(&self, x: f64) -> Vec<f64> {
        let x = self.clamp(x);
        self.sets.iter().map(|s| s.membership(x)).collect()
    }
}

/// Ordered, nonempty set of integer node deltas.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<i32>", into = "Vec<i32>"))]
pub struct ActionSet(Vec<i32>);

impl ActionSet {
    pub fn new(deltas: Vec<i32>) -> Result<Self> {
        if deltas.is_empty() || deltas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidRuleBase(format!(
                "action set {deltas:?} must be nonempty and strictly increasing"
            )));
        }
        Ok(Self(deltas))
    }

    pub fn as_slice(&self) -> &[i32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn delta(&self, index: usize) -> i32 {
        self.0[index]
    }

    pub fn index_of(&self, delta: i32) -> Option<usize> {
        self.0.iter().position(|&d| d == delta)
    }

    pub fn min(&self) -> i32 {
        self.0[0]
    }

    pub fn max(&self) -> i32 {
        self.0[self.0.len() - 1]
    }
}

impl Default for ActionSet {
    fn default() -> Self {
        Self(alloc::vec![-2, -1, 0, 1, 2])
    }
}

impl TryFrom<Vec<i32>> for ActionSet {
    type Error = Error;

    fn try_from(value: Vec<i32>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<ActionSet> for Vec<i32> {
    fn from(value: ActionSet) -> Self {
        value.0
    }
}

/// Firing level of every rule for one crisp input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FiringVector(Vec<f64>);

impl FiringVector {
    pub fn new(degrees: Vec<f64>) -> Self {
        Self(degrees)
    }

    /// All weight on a single rule.
    pub fn singleton(n_rules: usize, rule: usize) -> Self {
        let mut d = alloc::vec![0.0; n_rules];
        d[rule] = 1.0;
        Self(d)
    }

    pub fn degrees(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    /// Indices and degrees of rules with nonzero firing.
    pub fn fired(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0.iter().copied().enumerate().filter(|&(_, a)| a > 0.0)
    }
}

/// Full-product rule base over a list of input partitions.
///
/// Rule indices are row-major over the inputs, the first input varying
/// slowest: with inputs `(w, rt)` rule `i` is `(w = i / 3, rt = i % 3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleBase {
    inputs: Vec<FuzzyPartition>,
    antecedents: Vec<Vec<usize>>,
    actions: ActionSet,
}

impl RuleBase {
    pub fn full_product(inputs: Vec<FuzzyPartition>, actions: ActionSet) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidRuleBase("no inputs".into()));
        }
        let mut antecedents: Vec<Vec<usize>> = alloc::vec![Vec::new()];
        for p in &inputs {
            antecedents = antecedents
                .into_iter()
                .flat_map(|prefix| {
                    (0..p.sets().len()).map(move |k| {
                        let mut a = prefix.clone();
                        a.push(k);
                        a
                    })
                })
                .collect();
        }
        Ok(Self { inputs, antecedents, actions })
    }

    /// Default 3 x 3 rule base over `(w, rt)` with actions `{-2..=2}`.
    pub fn default_for(rt_des_ms: f64, k: f64) -> Self {
        Self::scaled_for(100.0, rt_des_ms, k)
    }

    /// Default rule base with the workload partition stretched to `w_max`.
    pub fn scaled_for(w_max: f64, rt_des_ms: f64, k: f64) -> Self {
        Self::full_product(
            alloc::vec![
                FuzzyPartition::workload(w_max),
                FuzzyPartition::response_time_default(rt_des_ms, k),
            ],
            ActionSet::default(),
        )
        .expect("default rule base is valid")
    }

    pub fn inputs(&self) -> &[FuzzyPartition] {
        &self.inputs
    }

    pub fn actions(&self) -> &ActionSet {
        &self.actions
    }

    pub fn n_rules(&self) -> usize {
        self.antecedents.len()
    }

    pub fn antecedent(&self, rule: usize) -> &[usize] {
        &self.antecedents[rule]
    }

    /// Rule index for one set index per input.
    pub fn rule_index(&self, sets: &[usize]) -> Option<usize> {
        if sets.len() != self.inputs.len() {
            return None;
        }
        self.antecedents.iter().position(|a| a == sets)
    }

    /// Firing levels for crisp inputs (one per partition, clamped into each
    /// domain), combining antecedents with the product t-norm.
    pub fn fuzzify(&self, crisp: &[f64]) -> FiringVector {
        assert_eq!(crisp.len(), self.inputs.len(), "one crisp value per input");
        let memberships: Vec<Vec<f64>> =
            self.inputs.iter().zip(crisp).map(|(p, &x)| p.memberships(x)).collect();
        let degrees = self
            .antecedents
            .iter()
            .map(|ante| ante.iter().zip(&memberships).map(|(&k, mu)| mu[k]).product())
            .collect();
        FiringVector(degrees)
    }

    /// Crisp input vector at the peak of every antecedent set of `rule`.
    pub fn rule_peak(&self, rule: usize) -> Vec<f64> {
        self.antecedents[rule]
            .iter()
            .zip(&self.inputs)
            .map(|(&k, p)| p.sets()[k].shape.peak())
            .collect()
    }

    /// Plain-text rule listing, one `IF .. THEN delta=<int>` line per rule.
    pub fn describe(&self, consequents: &[i32]) -> String {
        let mut out = String::new();
        for (ante, delta) in self.antecedents.iter().zip(consequents) {
            out.push_str("IF ");
            for (j, (&k, p)) in ante.iter().zip(&self.inputs).enumerate() {
                if j > 0 {
                    out.push_str(" AND ");
                }
                let _ = write!(out, "{} IS {}", p.label(), p.sets()[k].name);
            }
            let _ = writeln!(out, " THEN delta={delta}");
        }
        out
    }
}

/// Weighted average of the rule consequents, rounded half away from zero.
pub fn defuzzify(firing: &FiringVector, consequents: &[f64]) -> i32 {
    libm::round(weighted_average(firing, consequents)) as i32
}

/// Unrounded controller output.
pub fn weighted_average(firing: &FiringVector, consequents: &[f64]) -> f64 {
    debug_assert_eq!(firing.len(), consequents.len());
    firing.degrees().iter().zip(consequents).map(|(a, c)| a * c).sum()
}
