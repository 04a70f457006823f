//! Utility of the running system and the reinforcement signal derived from it.
//!
//! `U = w1 * th / th_max + w2 * (1 - vm / vm_max) + w3 * (1 - H(rt))`, where
//! `H` ramps linearly from 0 at the desired response time to 1 at twice it.
//! The reward for an action is the change in utility it caused.

use crate::error::{param, Result};
use crate::sim::Observation;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RewardWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { w1: 1.0, w2: 1.0, w3: 1.0 }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.w1, self.w2, self.w3].iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(param("reward", "weights must be finite and nonnegative"));
        }
        Ok(())
    }

    /// Largest possible utility, which also bounds `|reward|`.
    pub fn total(&self) -> f64 {
        self.w1 + self.w2 + self.w3
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SloConfig {
    /// Desired response time, ms.
    pub rt_des_ms: f64,
    /// Throughput normalizer, requests per control interval.
    pub th_max: f64,
    pub vm_max: u32,
}

impl SloConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rt_des_ms.is_finite() && self.rt_des_ms > 0.0) {
            return Err(param("slo.rt_des_ms", "must be positive"));
        }
        if !(self.th_max.is_finite() && self.th_max > 0.0) {
            return Err(param("slo.th_max", "must be positive"));
        }
        if self.vm_max == 0 {
            return Err(param("slo.vm_max", "must be positive"));
        }
        Ok(())
    }
}

/// SLO-violation penalty in `[0, 1]`.
pub fn penalty_h(rt_ms: f64, rt_des_ms: f64) -> f64 {
    if rt_ms <= rt_des_ms {
        0.0
    } else if rt_ms >= 2.0 * rt_des_ms {
        1.0
    } else {
        (rt_ms - rt_des_ms) / rt_des_ms
    }
}

/// Utility from raw signals; `th` is clamped to `[0, th_max]` and `vm` to
/// `[1, vm_max]` before normalizing.
pub fn utility_of(th: f64, vm: f64, rt_ms: f64, weights: &RewardWeights, slo: &SloConfig) -> f64 {
    let vm_max = f64::from(slo.vm_max);
    let th = th.clamp(0.0, slo.th_max);
    let vm = vm.clamp(1.0, vm_max);
    weights.w1 * (th / slo.th_max)
        + weights.w2 * (1.0 - vm / vm_max)
        + weights.w3 * (1.0 - penalty_h(rt_ms.max(0.0), slo.rt_des_ms))
}

pub fn utility(obs: &Observation, weights: &RewardWeights, slo: &SloConfig) -> f64 {
    utility_of(obs.th as f64, f64::from(obs.vm), obs.rt_mean_ms, weights, slo)
}

pub fn reward(u_now: f64, u_prev: f64) -> f64 {
    u_now - u_prev
}
