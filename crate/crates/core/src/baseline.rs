//! Reactive threshold scaler standing in for a cloud platform's native
//! auto-scaling: one node up when the recent 95th-percentile response time
//! exceeds `hi_ms`, one node down when it falls below `lo_ms`.

use alloc::collections::VecDeque;

use crate::error::{param, Result};
use crate::sim::Observation;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ThresholdConfig {
    pub hi_ms: f64,
    pub lo_ms: f64,
    /// Number of recent intervals whose p95 values are averaged.
    pub window: usize,
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo_ms.is_finite() && self.hi_ms.is_finite() && 0.0 <= self.lo_ms && self.lo_ms <= self.hi_ms) {
            return Err(param("baseline", "need 0 <= lo_ms <= hi_ms"));
        }
        if self.window == 0 {
            return Err(param("baseline.window", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ThresholdRule {
    cfg: ThresholdConfig,
    recent: VecDeque<f64>,
}

impl ThresholdRule {
    pub fn new(cfg: ThresholdConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, recent: VecDeque::with_capacity(cfg.window) })
    }

    pub fn config(&self) -> &ThresholdConfig {
        &self.cfg
    }

    /// Records one interval; empty intervals carry no response-time signal
    /// and are skipped.
    pub fn observe(&mut self, obs: &Observation) {
        if obs.empty {
            return;
        }
        if self.recent.len() == self.cfg.window {
            self.recent.pop_front();
        }
        self.recent.push_back(obs.rt_p95_ms);
    }

    /// Desired delta given the intervals seen so far.
    pub fn decide(&self) -> i32 {
        if self.recent.is_empty() {
            return 0;
        }
        let rt = self.recent.iter().sum::<f64>() / self.recent.len() as f64;
        classify(rt, &self.cfg)
    }
}

/// The bare threshold rule on one response-time value.
pub fn classify(rt_p95_ms: f64, cfg: &ThresholdConfig) -> i32 {
    if rt_p95_ms > cfg.hi_ms {
        1
    } else if rt_p95_ms < cfg.lo_ms {
        -1
    } else {
        0
    }
}
