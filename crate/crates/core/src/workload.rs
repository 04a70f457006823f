//! Synthetic workload patterns and their conversion into request arrivals.
//!
//! An intensity in `[0, 100]` is both the load level and the Fibonacci index
//! of the requests issued at that time. Shapes are defined over normalized
//! time `u = t / duration` so a pattern keeps its look at any duration.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{param, Error, Result};
use crate::rng::{self, Stream};
use crate::sim::{Millis, Request};

pub const MAX_INTENSITY: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Pattern {
    BigSpike,
    DualPhase,
    LargeVariations,
    QuicklyVarying,
    SlowlyVarying,
    SteepTriPhase,
}

impl Pattern {
    pub const ALL: [Pattern; 6] = [
        Self::BigSpike,
        Self::DualPhase,
        Self::LargeVariations,
        Self::QuicklyVarying,
        Self::SlowlyVarying,
        Self::SteepTriPhase,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::BigSpike => "big_spike",
            Self::DualPhase => "dual_phase",
            Self::LargeVariations => "large_variations",
            Self::QuicklyVarying => "quickly_varying",
            Self::SlowlyVarying => "slowly_varying",
            Self::SteepTriPhase => "steep_tri_phase",
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s.trim().chars().map(|c| if c == '-' || c == ' ' { '_' } else { c.to_ascii_lowercase() }).collect();
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == norm)
            .ok_or_else(|| Error::Unknown { kind: "workload pattern", name: s.into() })
    }
}

/// Shape parameters. Amplitudes of the sinusoidal patterns are peak-to-peak
/// swings; noise is uniform in `[-noise, noise]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct WorkloadParams {
    pub sample_interval_ms: Millis,
    pub noise: f64,
    pub spike_base: f64,
    pub spike_height: f64,
    /// Spike center as a fraction of the duration.
    pub spike_center: f64,
    /// Gaussian sigma as a fraction of the duration.
    pub spike_width: f64,
    pub dual_low: f64,
    pub dual_high: f64,
    pub large_mean: f64,
    pub large_swing: f64,
    pub large_cycles: f64,
    pub quick_mean: f64,
    pub quick_swing: f64,
    pub quick_cycles: f64,
    pub quick_noise: f64,
    pub slow_mean: f64,
    pub slow_swing: f64,
    pub slow_cycles: f64,
    pub tri_levels: [f64; 3],
    /// Length of one repetition of the shape; the whole duration when unset.
    pub period_ms: Option<Millis>,
}

impl Default for WorkloadParams {
    fn default() -> Self {
        Self {
            sample_interval_ms: 10_000,
            noise: 3.0,
            spike_base: 20.0,
            spike_height: 70.0,
            spike_center: 0.5,
            spike_width: 0.03,
            dual_low: 25.0,
            dual_high: 70.0,
            large_mean: 50.0,
            large_swing: 70.0,
            large_cycles: 3.0,
            quick_mean: 50.0,
            quick_swing: 40.0,
            quick_cycles: 40.0,
            quick_noise: 10.0,
            slow_mean: 50.0,
            slow_swing: 30.0,
            slow_cycles: 2.0,
            tri_levels: [20.0, 50.0, 80.0],
            period_ms: None,
        }
    }
}

impl WorkloadParams {
    pub fn validate(&self) -> Result<()> {
        if self.sample_interval_ms == 0 {
            return Err(param("workload.sample_interval_ms", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.spike_center) || self.spike_width <= 0.0 {
            return Err(param("workload.spike", "center must lie in [0, 1] and width be positive"));
        }
        if self.period_ms == Some(0) {
            return Err(param("workload.period_s", "must be positive"));
        }
        Ok(())
    }

    /// Time window `[start, end]` holding the first spike, two sigmas either
    /// side.
    pub fn spike_window(&self, duration_ms: Millis) -> (Millis, Millis) {
        let d = self.period_ms.unwrap_or(duration_ms) as f64;
        let lo = (self.spike_center - 2.0 * self.spike_width).max(0.0) * d;
        let hi = (self.spike_center + 2.0 * self.spike_width).min(1.0) * d;
        (lo as Millis, hi as Millis)
    }

    fn shape(&self, pattern: Pattern, u: f64) -> f64 {
        let wave = |cycles: f64, phase: f64| libm::sin(2.0 * PI * cycles * u + phase);
        match pattern {
            Pattern::BigSpike => {
                let z = (u - self.spike_center) / self.spike_width;
                self.spike_base + self.spike_height * libm::exp(-0.5 * z * z)
            }
            Pattern::DualPhase => {
                if u < 0.5 {
                    self.dual_low
                } else {
                    self.dual_high
                }
            }
            Pattern::LargeVariations => self.large_mean + 0.5 * self.large_swing * wave(self.large_cycles, 0.0),
            Pattern::QuicklyVarying => {
                let c = self.quick_cycles;
                self.quick_mean + 0.5 * self.quick_swing * (0.6 * wave(c, 0.0) + 0.4 * wave(2.43 * c, 1.0))
            }
            Pattern::SlowlyVarying => self.slow_mean + 0.5 * self.slow_swing * wave(self.slow_cycles, 0.0),
            Pattern::SteepTriPhase => {
                let k = ((u * 3.0) as usize).min(2);
                self.tri_levels[k]
            }
        }
    }

    fn noise_for(&self, pattern: Pattern) -> f64 {
        if pattern == Pattern::QuicklyVarying {
            self.quick_noise
        } else {
            self.noise
        }
    }
}

/// Piecewise-constant intensity series; sample `k` holds from its time up to
/// the next sample (the last one for `sample_interval_ms`).
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadTrace {
    pub pattern: Option<Pattern>,
    pub seed: u64,
    pub sample_interval_ms: Millis,
    samples: Vec<(Millis, f64)>,
}

impl WorkloadTrace {
    /// Trace from explicit samples, e.g. an imported CSV.
    pub fn from_samples(samples: Vec<(Millis, f64)>, sample_interval_ms: Millis) -> Result<Self> {
        if sample_interval_ms == 0 {
            return Err(param("trace", "sample interval must be positive"));
        }
        if samples.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(param("trace", "sample times must be strictly increasing"));
        }
        if samples.iter().any(|&(_, x)| !(0.0..=MAX_INTENSITY).contains(&x)) {
            return Err(param("trace", "intensities must lie in [0, 100]"));
        }
        Ok(Self { pattern: None, seed: 0, sample_interval_ms, samples })
    }

    pub fn samples(&self) -> &[(Millis, f64)] {
        &self.samples
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// End of the covered time span.
    pub fn duration_ms(&self) -> Millis {
        self.samples.last().map_or(0, |&(t, _)| t + self.sample_interval_ms)
    }

    /// Intensity in effect at time `t`.
    pub fn intensity_at(&self, t: Millis) -> f64 {
        match self.samples.partition_point(|&(s, _)| s <= t) {
            0 => 0.0,
            k => self.samples[k - 1].1,
        }
    }

    /// Mean absolute change between consecutive samples.
    pub fn mean_abs_change(&self) -> f64 {
        if self.samples.len() < 2 {
            return 0.0;
        }
        let total: f64 = self.samples.windows(2).map(|w| libm::fabs(w[1].1 - w[0].1)).sum();
        total / (self.samples.len() - 1) as f64
    }
}

/// Deterministic trace of `pattern` over `[0, duration_ms)`.
pub fn generate(pattern: Pattern, duration_ms: Millis, seed: u64, params: &WorkloadParams) -> Result<WorkloadTrace> {
    params.validate()?;
    if duration_ms == 0 {
        return Err(param("workload.duration_s", "must be positive"));
    }
    let mut rng = rng::stream(seed, Stream::Workload);
    let step = params.sample_interval_ms;
    let noise = params.noise_for(pattern);
    let n = duration_ms.div_ceil(step);
    let period = params.period_ms.unwrap_or(duration_ms);
    let samples = (0..n)
        .map(|k| {
            let t = k * step;
            let u = (t % period) as f64 / period as f64;
            let jitter = if noise > 0.0 { rng.random_range(-noise..=noise) } else { 0.0 };
            (t, (params.shape(pattern, u) + jitter).clamp(0.0, MAX_INTENSITY))
        })
        .collect();
    Ok(WorkloadTrace { pattern: Some(pattern), seed, sample_interval_ms: step, samples })
}

/// Poisson arrivals per sample interval with mean `rate_scale * intensity`,
/// uniformly spread inside the interval and sorted; request sizes are the
/// rounded intensity.
pub fn to_arrivals<R: Rng + ?Sized>(trace: &WorkloadTrace, rate_scale: f64, rng: &mut R) -> Vec<Request> {
    let mut out = Vec::new();
    let mut id = 0;
    let step = trace.sample_interval_ms;
    for (k, &(t0, x)) in trace.samples.iter().enumerate() {
        let t1 = trace.samples.get(k + 1).map_or(t0 + step, |s| s.0);
        let mean = rate_scale * x;
        if mean <= 0.0 {
            continue;
        }
        let count = Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0);
        let size = libm::round(x) as u32;
        let mut times: Vec<Millis> = (0..count).map(|_| rng.random_range(t0..t1)).collect();
        times.sort_unstable();
        for t in times {
            out.push(Request::new(id, t, size));
            id += 1;
        }
    }
    out
}
