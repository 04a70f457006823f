//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line.
//!
//! Run with `cargo test -p fqscale --test acceptance -- --nocapture` to see
//! the lines; the strategy comparison takes several minutes.

use std::time::Instant;

use fqscale::config::{ExperimentConfig, StrategyChoice};
use fqscale::harness::{self, ExperimentReport};
use fqscale_core::controller::{self, default_run_config, strategy_policy, ExperimentLog};
use fqscale_core::fql::{
    ChosenActions, ConvergenceMonitor, ExplorationStrategy, Learner, QTable, StrategyKind,
};
use fqscale_core::fuzzy::{self, ActionSet, FiringVector, FuzzyPartition, FuzzySet, RuleBase, Shape};
use fqscale_core::reward::{self, RewardWeights, SloConfig};
use fqscale_core::rng::{self, Stream};
use fqscale_core::sim::{ClusterSim, Request, SimConfig};
use fqscale_core::stationary::StationaryEnv;
use fqscale_core::stats;
use fqscale_core::workload::{self, Pattern, WorkloadParams};
use rand::Rng;

fn verdict(n: u32, pass: bool, detail: &str) {
    println!("criterion {n}: {} - {detail}", if pass { "PASS" } else { "FAIL" });
}

// ---------------------------------------------------------------------------
// 1. Exact TD updates and utility substitutions.

struct TdCase {
    q: &'static [&'static [f64]],
    actions: &'static [i32],
    eta: f64,
    gamma: f64,
    firing: &'static [f64],
    chosen: &'static [usize],
    reward: f64,
    firing_next: &'static [f64],
    delta_q: f64,
    q_after: &'static [&'static [f64]],
}

// Expected values computed with exact rational arithmetic by an independent
// script, then rounded once to f64.
const TD_CASES: &[TdCase] = &[
    TdCase {
        q: &[&[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0]],
        actions: &[-1, 0, 1],
        eta: 1.0,
        gamma: 0.8,
        firing: &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        chosen: &[1, 1, 1, 1, 0, 1, 2, 2, 1],
        reward: 0.0,
        firing_next: &[0.0, 0.0, 0.0, 0.14, 0.0, 0.56, 0.0, 0.06, 0.24],
        delta_q: 0.0,
        q_after: &[&[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0]],
    },
    TdCase {
        q: &[&[0.76, -1.84, -0.31], &[-1.94, 1.5, -0.69], &[-1.16, 0.74, -0.93], &[-1.05, 1.83, 0.03], &[1.03, -1.76, -0.87], &[0.06, -0.31, 1.24], &[-0.67, 0.6, 0.29], &[0.34, -1.97, -0.96], &[0.69, 1.07, 1.03]],
        actions: &[-1, 0, 1],
        eta: 1.0,
        gamma: 0.8,
        firing: &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        chosen: &[0, 1, 0, 0, 0, 1, 1, 2, 2],
        reward: 0.67,
        firing_next: &[0.0, 0.0, 0.0, 0.32, 0.08, 0.48, 0.12, 0.0, 0.0],
        delta_q: 0.70816,
        q_after: &[&[0.76, -1.84, -0.31], &[-1.94, 1.5, -0.69], &[-1.16, 0.74, -0.93], &[-1.05, 1.83, 0.03], &[1.73816, -1.76, -0.87], &[0.06, -0.31, 1.24], &[-0.67, 0.6, 0.29], &[0.34, -1.97, -0.96], &[0.69, 1.07, 1.03]],
    },
    TdCase {
        q: &[&[-1.77, -1.88, 1.26, -1.46, -0.87], &[-0.39, 0.54, 1.59, 1.82, -1.75], &[-0.32, -0.98, -0.12, 0.77, 1.6]],
        actions: &[-2, -1, 0, 1, 2],
        eta: 0.1,
        gamma: 0.8,
        firing: &[0.25, 0.2, 0.55],
        chosen: &[1, 3, 1],
        reward: -0.62,
        firing_next: &[0.1, 0.45, 0.45],
        delta_q: 1.357,
        q_after: &[&[-1.77, -1.846075, 1.26, -1.46, -0.87], &[-0.39, 0.54, 1.59, 1.84714, -1.75], &[-0.32, -0.905365, -0.12, 0.77, 1.6]],
    },
    TdCase {
        q: &[&[-1.04, 0.6, 0.11], &[1.86, -0.29, 0.44], &[-1.89, -1.15, -0.76], &[0.09, -0.05, -0.57], &[-0.04, -0.59, -1.3], &[1.33, 1.24, -0.76], &[1.22, -0.96, 1.62], &[-1.84, 0.87, 1.29], &[-0.38, -1.2, 0.73]],
        actions: &[-1, 0, 1],
        eta: 1.0,
        gamma: 0.8,
        firing: &[0.0, 0.4, 0.0, 0.0, 0.0, 0.45, 0.15, 0.0, 0.0],
        chosen: &[0, 2, 2, 2, 0, 2, 0, 2, 1],
        reward: 0.52,
        firing_next: &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        delta_q: 0.983,
        q_after: &[&[-1.04, 0.6, 0.11], &[1.86, -0.29, 0.8332], &[-1.89, -1.15, -0.76], &[0.09, -0.05, -0.57], &[-0.04, -0.59, -1.3], &[1.33, 1.24, -0.31765], &[1.36745, -0.96, 1.62], &[-1.84, 0.87, 1.29], &[-0.38, -1.2, 0.73]],
    },
    TdCase {
        q: &[&[0.12, -1.9, -1.57, 1.09, 1.45], &[-0.65, -0.22, 0.45, 1.42, -1.52], &[-1.86, -1.39, 0.03, 0.39, 1.41], &[0.17, 0.62, 1.53, 0.39, -1.9], &[1.48, 0.62, -0.44, -0.48, -1.86], &[0.51, -0.74, 0.55, -1.88, 0.62], &[0.97, 1.67, -0.41, 0.51, 1.87], &[1.34, -1.63, 1.76, 1.05, -1.76], &[0.18, 1.9, 1.31, -1.92, -1.48]],
        actions: &[-2, -1, 0, 1, 2],
        eta: 0.1,
        gamma: 0.0,
        firing: &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.35, 0.0, 0.65],
        chosen: &[2, 1, 1, 3, 0, 1, 1, 1, 2],
        reward: -0.45,
        firing_next: &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        delta_q: -1.886,
        q_after: &[&[0.12, -1.9, -1.57, 1.09, 1.45], &[-0.65, -0.22, 0.45, 1.42, -1.52], &[-1.86, -1.39, 0.03, 0.39, 1.41], &[0.17, 0.62, 1.53, 0.39, -1.9], &[1.48, 0.62, -0.44, -0.48, -1.86], &[0.51, -0.74, 0.55, -1.88, 0.62], &[0.97, 1.60399, -0.41, 0.51, 1.87], &[1.34, -1.63, 1.76, 1.05, -1.76], &[0.18, 1.9, 1.18741, -1.92, -1.48]],
    },
    TdCase {
        q: &[&[-0.87, -1.03, 1.41], &[1.24, 0.99, 0.17], &[1.3, 0.81, 0.84], &[-1.25, -0.12, -0.64], &[-0.49, 0.1, 1.43], &[0.91, 0.98, -1.95], &[1.54, 1.95, 0.42], &[-1.7, -1.84, -1.32], &[1.69, 0.4, 0.94]],
        actions: &[-1, 0, 1],
        eta: 1.0,
        gamma: 0.8,
        firing: &[0.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.9],
        chosen: &[0, 2, 2, 2, 1, 1, 1, 2, 0],
        reward: 0.95,
        firing_next: &[0.0, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.7, 0.0],
        delta_q: -0.9256,
        q_after: &[&[-0.96256, -1.03, 1.41], &[1.24, 0.99, 0.17], &[1.3, 0.81, 0.84], &[-1.25, -0.12, -0.64], &[-0.49, 0.1, 1.43], &[0.91, 0.98, -1.95], &[1.54, 1.95, 0.42], &[-1.7, -1.84, -1.32], &[0.85696, 0.4, 0.94]],
    },
    TdCase {
        q: &[&[0.0, 0.0, 0.0, 0.0, 0.0]],
        actions: &[-2, -1, 0, 1, 2],
        eta: 0.5,
        gamma: 0.0,
        firing: &[1.0],
        chosen: &[1],
        reward: 0.64,
        firing_next: &[1.0],
        delta_q: 0.64,
        q_after: &[&[0.0, 0.32, 0.0, 0.0, 0.0]],
    },
    TdCase {
        q: &[&[0.46, 0.49, 0.03, 0.53, 1.12], &[0.31, -0.62, 1.05, 0.83, 0.6], &[-0.59, -1.61, 1.95, 1.73, -0.71], &[-0.41, 0.15, -0.48, -0.41, -0.23], &[-0.6, 0.31, 0.27, 1.35, 0.41], &[1.47, 1.14, 1.17, 0.85, 0.43], &[0.14, 1.67, -0.72, 0.65, -1.22], &[1.63, -0.73, 1.48, -0.13, -1.06], &[1.06, 0.59, 1.01, 1.86, -0.1]],
        actions: &[-2, -1, 0, 1, 2],
        eta: 0.1,
        gamma: 0.8,
        firing: &[0.95, 0.0, 0.0, 0.0, 0.0, 0.0, 0.05, 0.0, 0.0],
        chosen: &[1, 3, 3, 2, 3, 0, 4, 3, 2],
        reward: 0.0,
        firing_next: &[0.18, 0.0, 0.0, 0.02, 0.0, 0.72, 0.0, 0.08, 0.0],
        delta_q: 0.71022,
        q_after: &[&[0.46, 0.5574709, 0.03, 0.53, 1.12], &[0.31, -0.62, 1.05, 0.83, 0.6], &[-0.59, -1.61, 1.95, 1.73, -0.71], &[-0.41, 0.15, -0.48, -0.41, -0.23], &[-0.6, 0.31, 0.27, 1.35, 0.41], &[1.47, 1.14, 1.17, 0.85, 0.43], &[0.14, 1.67, -0.72, 0.65, -1.2164489], &[1.63, -0.73, 1.48, -0.13, -1.06], &[1.06, 0.59, 1.01, 1.86, -0.1]],
    },
    TdCase {
        q: &[&[1.92, -1.48, -1.79], &[-1.08, 0.61, 1.2], &[-1.15, 0.41, -0.43]],
        actions: &[-1, 0, 1],
        eta: 0.1,
        gamma: 0.8,
        firing: &[0.15, 0.2, 0.65],
        chosen: &[2, 2, 1],
        reward: -0.38,
        firing_next: &[0.9, 0.0, 0.1],
        delta_q: 0.7972,
        q_after: &[&[1.92, -1.48, -1.778042], &[-1.08, 0.61, 1.215944], &[-1.15, 0.461818, -0.43]],
    },
    TdCase {
        q: &[&[0.97, -0.48, -0.72], &[-0.64, 1.48, 0.67], &[1.86, -0.01, -0.72], &[0.15, -0.51, 1.82], &[0.56, 1.35, -1.4], &[-1.2, 1.37, -0.91], &[-1.11, 1.62, 1.07], &[0.18, 1.94, 1.59], &[-0.57, -0.51, -1.61]],
        actions: &[-1, 0, 1],
        eta: 1.0,
        gamma: 0.8,
        firing: &[0.03, 0.0, 0.0, 0.07, 0.0, 0.0, 0.27, 0.63, 0.0],
        chosen: &[1, 2, 1, 1, 1, 2, 0, 2, 0],
        reward: -0.45,
        firing_next: &[0.0, 0.0, 0.0, 0.0, 0.1, 0.0, 0.0, 0.0, 0.9],
        delta_q: -1.3611,
        q_after: &[&[0.97, -0.520833, -0.72], &[-0.64, 1.48, 0.67], &[1.86, -0.01, -0.72], &[0.15, -0.605277, 1.82], &[0.56, 1.35, -1.4], &[-1.2, 1.37, -0.91], &[-1.477497, 1.62, 1.07], &[0.18, 1.94, 0.732507], &[-0.57, -0.51, -1.61]],
    },
    TdCase {
        q: &[&[-0.19, -1.15, 0.14], &[1.34, -0.2, 0.45], &[-1.24, 1.09, 1.22]],
        actions: &[-1, 0, 1],
        eta: 0.1,
        gamma: 0.0,
        firing: &[0.0, 1.0, 0.0],
        chosen: &[2, 1, 1],
        reward: -0.51,
        firing_next: &[0.0, 0.35, 0.65],
        delta_q: -0.31,
        q_after: &[&[-0.19, -1.15, 0.14], &[1.34, -0.231, 0.45], &[-1.24, 1.09, 1.22]],
    },
    TdCase {
        q: &[&[1.82, -1.19, -0.28, 1.43, -0.69], &[1.61, -0.6, -1.13, -0.8, -1.54], &[1.98, 1.74, -1.36, -0.07, 0.77], &[1.61, -0.99, -1.62, -0.99, -1.58], &[-0.3, 1.32, -0.7, 1.93, -0.08], &[-0.79, -1.24, -1.03, 0.56, -0.04], &[1.88, 1.56, -1.78, 0.21, 1.1], &[-0.62, 1.95, -0.93, -1.46, 0.6], &[0.01, -0.3, 0.83, -0.41, -0.1]],
        actions: &[-2, -1, 0, 1, 2],
        eta: 0.1,
        gamma: 0.5,
        firing: &[0.0, 0.0, 0.12, 0.0, 0.28, 0.0, 0.18, 0.0, 0.42],
        chosen: &[1, 0, 0, 4, 3, 1, 1, 4, 2],
        reward: 0.43,
        firing_next: &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        delta_q: -0.0374,
        q_after: &[&[1.82, -1.19, -0.28, 1.43, -0.69], &[1.61, -0.6, -1.13, -0.8, -1.54], &[1.9795512, 1.74, -1.36, -0.07, 0.77], &[1.61, -0.99, -1.62, -0.99, -1.58], &[-0.3, 1.32, -0.7, 1.9289528, -0.08], &[-0.79, -1.24, -1.03, 0.56, -0.04], &[1.88, 1.5593268, -1.78, 0.21, 1.1], &[-0.62, 1.95, -0.93, -1.46, 0.6], &[0.01, -0.3, 0.8284292, -0.41, -0.1]],
    },
    TdCase {
        q: &[&[0.0, 0.0, 0.0, 0.0, 0.0]],
        actions: &[-2, -1, 0, 1, 2],
        eta: 0.5,
        gamma: 0.8,
        firing: &[1.0],
        chosen: &[2],
        reward: 0.23,
        firing_next: &[1.0],
        delta_q: 0.23,
        q_after: &[&[0.0, 0.0, 0.115, 0.0, 0.0]],
    },
    TdCase {
        q: &[&[0.48, 1.17, -0.52, 1.0, -1.46], &[0.96, -0.17, 0.24, 1.29, -0.94], &[1.85, 0.88, -0.6, -0.2, -1.2], &[-1.67, 1.5, -0.94, -0.27, 1.72], &[-1.38, 1.85, 0.44, -1.36, -1.91], &[-0.44, -0.72, 0.36, -0.64, -0.11], &[-0.51, 1.52, 0.53, -0.79, 1.26], &[-0.96, 0.52, 0.51, 1.04, -1.8], &[-1.85, 1.1, 0.75, -1.1, -0.35]],
        actions: &[-2, -1, 0, 1, 2],
        eta: 0.5,
        gamma: 0.5,
        firing: &[0.4, 0.0, 0.0, 0.0, 0.0, 0.6, 0.0, 0.0, 0.0],
        chosen: &[0, 3, 4, 2, 2, 3, 3, 2, 0],
        reward: 0.76,
        firing_next: &[0.0, 0.24, 0.0, 0.36, 0.0, 0.0, 0.16, 0.0, 0.24],
        delta_q: 1.67,
        q_after: &[&[0.814, 1.17, -0.52, 1.0, -1.46], &[0.96, -0.17, 0.24, 1.29, -0.94], &[1.85, 0.88, -0.6, -0.2, -1.2], &[-1.67, 1.5, -0.94, -0.27, 1.72], &[-1.38, 1.85, 0.44, -1.36, -1.91], &[-0.44, -0.72, 0.36, -0.139, -0.11], &[-0.51, 1.52, 0.53, -0.79, 1.26], &[-0.96, 0.52, 0.51, 1.04, -1.8], &[-1.85, 1.1, 0.75, -1.1, -0.35]],
    },
    TdCase {
        q: &[&[1.5, 1.7, -1.8, -0.37, 1.18], &[0.4, -1.37, -1.76, 0.87, -0.2], &[0.01, -1.67, -1.59, 1.84, 0.27], &[-0.07, -1.04, -0.94, 0.32, -1.56], &[-0.39, 1.41, 1.73, -1.22, 1.92], &[1.59, -1.97, -1.63, -1.75, -1.98], &[0.35, 1.46, 1.02, -1.82, 0.01], &[1.0, 0.06, 0.14, 0.35, 0.26], &[0.56, 1.87, -1.75, 0.82, -0.62]],
        actions: &[-2, -1, 0, 1, 2],
        eta: 0.5,
        gamma: 0.8,
        firing: &[0.18, 0.0, 0.0, 0.0, 0.0, 0.02, 0.72, 0.0, 0.08],
        chosen: &[1, 1, 1, 2, 2, 0, 0, 0, 4],
        reward: 0.0,
        firing_next: &[0.4, 0.0, 0.0, 0.4, 0.0, 0.0, 0.0, 0.1, 0.1],
        delta_q: 0.3358,
        q_after: &[&[1.5, 1.730222, -1.8, -0.37, 1.18], &[0.4, -1.37, -1.76, 0.87, -0.2], &[0.01, -1.67, -1.59, 1.84, 0.27], &[-0.07, -1.04, -0.94, 0.32, -1.56], &[-0.39, 1.41, 1.73, -1.22, 1.92], &[1.593358, -1.97, -1.63, -1.75, -1.98], &[0.470888, 1.46, 1.02, -1.82, 0.01], &[1.0, 0.06, 0.14, 0.35, 0.26], &[0.56, 1.87, -1.75, 0.82, -0.606568]],
    },
    TdCase {
        q: &[&[1.29, -1.93, -0.74], &[-0.5, 0.98, -0.92], &[-1.85, -0.72, -1.77]],
        actions: &[-1, 0, 1],
        eta: 1.0,
        gamma: 0.8,
        firing: &[0.2, 0.1, 0.7],
        chosen: &[1, 1, 1],
        reward: -0.62,
        firing_next: &[0.0, 0.0, 1.0],
        delta_q: -0.404,
        q_after: &[&[1.29, -2.0108, -0.74], &[-0.5, 0.9396, -0.92], &[-1.85, -1.0028, -1.77]],
    },
    TdCase {
        q: &[&[-0.75, 1.72, -1.02, 1.38, 0.21]],
        actions: &[-2, -1, 0, 1, 2],
        eta: 1.0,
        gamma: 0.5,
        firing: &[1.0],
        chosen: &[1],
        reward: 0.39,
        firing_next: &[1.0],
        delta_q: -0.47,
        q_after: &[&[-0.75, 1.25, -1.02, 1.38, 0.21]],
    },
    TdCase {
        q: &[&[0.01, 1.94, -0.7, -1.54, -1.52], &[1.77, 1.71, 0.09, -1.93, 0.9], &[1.24, -0.77, 0.13, 1.84, -1.59], &[1.11, -0.41, 0.62, 1.33, 0.72], &[-1.84, -0.24, -1.45, -0.41, 0.75], &[-0.49, -0.05, 0.91, -1.85, 1.12], &[-0.69, -1.52, 0.88, 0.84, -0.42], &[-0.84, 1.6, -1.87, -1.72, -1.53], &[-1.29, 1.25, -1.23, 1.37, 1.15]],
        actions: &[-2, -1, 0, 1, 2],
        eta: 0.5,
        gamma: 0.8,
        firing: &[0.45, 0.0, 0.0, 0.0, 0.0, 0.05, 0.5, 0.0, 0.0],
        chosen: &[3, 3, 1, 0, 1, 2, 3, 0, 3],
        reward: 0.11,
        firing_next: &[0.0, 0.0, 0.0, 0.54, 0.06, 0.0, 0.36, 0.04, 0.0],
        delta_q: 1.2527,
        q_after: &[&[0.01, 1.94, -0.7, -1.2581425, -1.52], &[1.77, 1.71, 0.09, -1.93, 0.9], &[1.24, -0.77, 0.13, 1.84, -1.59], &[1.11, -0.41, 0.62, 1.33, 0.72], &[-1.84, -0.24, -1.45, -0.41, 0.75], &[-0.49, -0.05, 0.9413175, -1.85, 1.12], &[-0.69, -1.52, 0.88, 1.153175, -0.42], &[-0.84, 1.6, -1.87, -1.72, -1.53], &[-1.29, 1.25, -1.23, 1.37, 1.15]],
    },
    TdCase {
        q: &[&[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0]],
        actions: &[-1, 0, 1],
        eta: 1.0,
        gamma: 0.5,
        firing: &[0.4, 0.2, 0.4],
        chosen: &[2, 2, 0],
        reward: 0.03,
        firing_next: &[0.0, 0.0, 1.0],
        delta_q: 0.03,
        q_after: &[&[0.0, 0.0, 0.012], &[0.0, 0.0, 0.006], &[0.012, 0.0, 0.0]],
    },
    TdCase {
        q: &[&[-0.58, -0.27, -1.14], &[-1.64, -1.01, 1.36], &[-0.78, 0.93, -1.06], &[1.86, 1.38, -1.16], &[-0.11, -1.37, 1.26], &[0.79, -0.4, 1.48], &[-0.85, 1.62, 1.64], &[1.95, 1.2, -1.94], &[0.11, -1.95, 0.77]],
        actions: &[-1, 0, 1],
        eta: 1.0,
        gamma: 0.5,
        firing: &[0.25, 0.0, 0.2, 0.0, 0.0, 0.0, 0.0, 0.55, 0.0],
        chosen: &[0, 0, 1, 0, 2, 0, 2, 2, 0],
        reward: 0.52,
        firing_next: &[0.0, 0.0, 0.0, 0.63, 0.27, 0.07, 0.0, 0.03, 0.0],
        delta_q: 2.38305,
        q_after: &[&[0.0157625, -0.27, -1.14], &[-1.64, -1.01, 1.36], &[-0.78, 1.40661, -1.06], &[1.86, 1.38, -1.16], &[-0.11, -1.37, 1.26], &[0.79, -0.4, 1.48], &[-0.85, 1.62, 1.64], &[1.95, 1.2, -0.6293225], &[0.11, -1.95, 0.77]],
    },
    TdCase {
        q: &[&[-0.03, -0.39, -0.47, 0.14, 1.14], &[-0.12, 0.29, 1.56, 1.82, 1.65], &[1.09, -0.26, -1.22, 0.39, 1.51], &[-1.22, 0.92, -1.63, 0.58, -0.46], &[0.96, 0.84, 0.58, -1.04, -0.04], &[-0.07, -0.74, 1.33, -1.61, -0.88], &[-1.48, -0.24, 0.59, -1.41, -0.65], &[0.64, 1.23, 0.53, 1.96, -1.6], &[0.58, -1.91, 0.57, 0.17, 1.77]],
        actions: &[-2, -1, 0, 1, 2],
        eta: 0.1,
        gamma: 0.8,
        firing: &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        chosen: &[1, 1, 4, 0, 4, 0, 2, 2, 2],
        reward: 0.46,
        firing_next: &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        delta_q: 1.438,
        q_after: &[&[-0.03, -0.39, -0.47, 0.14, 1.14], &[-0.12, 0.29, 1.56, 1.82, 1.65], &[1.09, -0.26, -1.22, 0.39, 1.51], &[-1.22, 0.92, -1.63, 0.58, -0.46], &[0.96, 0.84, 0.58, -1.04, -0.04], &[-0.07, -0.74, 1.33, -1.61, -0.88], &[-1.48, -0.24, 0.7338, -1.41, -0.65], &[0.64, 1.23, 0.53, 1.96, -1.6], &[0.58, -1.91, 0.57, 0.17, 1.77]],
    },
    TdCase {
        q: &[&[1.92, 2.0, -0.79, -0.71, 0.62], &[-0.12, 0.25, -0.59, 1.4, -1.71], &[0.06, -1.96, 0.94, 0.92, -1.91]],
        actions: &[-2, -1, 0, 1, 2],
        eta: 0.1,
        gamma: 0.8,
        firing: &[0.3, 0.1, 0.6],
        chosen: &[3, 2, 2],
        reward: 0.0,
        firing_next: &[0.0, 0.35, 0.65],
        delta_q: 0.5888,
        q_after: &[&[1.92, 2.0, -0.79, -0.692336, 0.62], &[-0.12, 0.25, -0.584112, 1.4, -1.71], &[0.06, -1.96, 0.975328, 0.92, -1.91]],
    },
    TdCase {
        q: &[&[-1.37, 1.73, 1.05]],
        actions: &[-1, 0, 1],
        eta: 0.5,
        gamma: 0.8,
        firing: &[1.0],
        chosen: &[2],
        reward: -0.47,
        firing_next: &[1.0],
        delta_q: -0.136,
        q_after: &[&[-1.37, 1.73, 0.982]],
    },
    TdCase {
        q: &[&[0.69, -1.69, 0.63, -0.16, 1.32], &[-1.77, 0.11, -0.86, -0.61, -0.71], &[0.1, 1.42, 1.41, -0.1, 0.77], &[1.52, 0.58, 0.28, -0.76, 1.78], &[1.45, 1.83, 0.02, -0.14, 0.83], &[1.79, 0.16, -0.93, 0.12, 1.75], &[1.72, 0.98, 0.31, 1.85, -0.59], &[-1.9, -0.5, 1.47, 1.49, -1.51], &[-0.72, 1.81, 1.84, -0.84, 0.8]],
        actions: &[-2, -1, 0, 1, 2],
        eta: 0.5,
        gamma: 0.5,
        firing: &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        chosen: &[3, 3, 1, 4, 0, 0, 1, 4, 1],
        reward: 0.65,
        firing_next: &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
        delta_q: 0.59,
        q_after: &[&[0.69, -1.69, 0.63, -0.16, 1.32], &[-1.77, 0.11, -0.86, -0.61, -0.71], &[0.1, 1.42, 1.41, -0.1, 0.77], &[1.52, 0.58, 0.28, -0.76, 1.78], &[1.45, 1.83, 0.02, -0.14, 0.83], &[1.79, 0.16, -0.93, 0.12, 1.75], &[1.72, 1.275, 0.31, 1.85, -0.59], &[-1.9, -0.5, 1.47, 1.49, -1.51], &[-0.72, 1.81, 1.84, -0.84, 0.8]],
    },
];

fn run_td_case(c: &TdCase) -> (f64, Vec<f64>) {
    let rows = c.q.iter().map(|r| r.to_vec()).collect();
    let mut table = QTable::from_rows(rows, ActionSet::new(c.actions.to_vec()).unwrap(), c.eta, c.gamma).unwrap();
    let chosen = ChosenActions { actions: c.chosen.to_vec(), firing: FiringVector::new(c.firing.to_vec()) };
    let td = table.update(&chosen, c.reward, &FiringVector::new(c.firing_next.to_vec()));
    (td.delta_q, table.values().to_vec())
}

#[test]
fn criterion_1_math_oracles() {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for (k, c) in TD_CASES.iter().enumerate() {
        let (dq, q) = run_td_case(c);
        let expect: Vec<f64> = c.q_after.iter().flat_map(|r| r.iter().copied()).collect();
        let err = q.iter().zip(&expect).map(|(a, b)| (a - b).abs()).fold((dq - c.delta_q).abs(), f64::max);
        assert!(err <= 1e-12, "TD case {k}: error {err:e}");
        worst = worst.max(err);
    }

    // Worked by hand: zero table, one rule firing fully, r = 1.
    let mut table = QTable::new(1, ActionSet::default(), 0.1, 0.8).unwrap();
    let f = FiringVector::singleton(1, 0);
    let td = table.update(&ChosenActions { actions: vec![3], firing: f.clone() }, 1.0, &f);
    assert_eq!(td.delta_q, 1.0);
    assert!((table.get(0, 3) - 0.1).abs() < 1e-15);
    // Second step: V = 0.1, Q = 0.1, dQ = 1 + 0.08 - 0.1 = 0.98.
    let td = table.update(&ChosenActions { actions: vec![3], firing: f.clone() }, 1.0, &f);
    assert!((td.delta_q - 0.98).abs() < 1e-15);
    assert!((table.get(0, 3) - 0.198).abs() < 1e-15);

    let rt_des = 1000.0;
    for (ratio, h) in [(0.5, 0.0), (1.0, 0.0), (1.25, 0.25), (1.5, 0.5), (1.75, 0.75), (2.0, 1.0), (3.0, 1.0)] {
        let got = reward::penalty_h(ratio * rt_des, rt_des);
        assert!((got - h).abs() < 1e-12, "H({ratio}) = {got}, want {h}");
    }
    let slo = SloConfig { rt_des_ms: rt_des, th_max: 100.0, vm_max: 7 };
    let w = RewardWeights::default();
    let substitutions = [
        // (th, vm, rt) -> th/100 + (1 - vm/7) + (1 - H)
        ((50.0, 2.0, 1500.0), 0.5 + 5.0 / 7.0 + 0.5),
        ((100.0, 7.0, 900.0), 1.0 + 0.0 + 1.0),
        ((0.0, 1.0, 2500.0), 0.0 + 6.0 / 7.0 + 0.0),
        ((25.0, 3.0, 1200.0), 0.25 + 4.0 / 7.0 + 0.8),
    ];
    for ((th, vm, rt), u) in substitutions {
        let got = reward::utility_of(th, vm, rt, &w, &slo);
        assert!((got - u).abs() < 1e-12, "U({th}, {vm}, {rt}) = {got}, want {u}");
    }
    let weighted = RewardWeights { w1: 2.0, w2: 0.5, w3: 1.5 };
    let got = reward::utility_of(50.0, 2.0, 1500.0, &weighted, &slo);
    assert!((got - (1.0 + 0.5 * 5.0 / 7.0 + 0.75)).abs() < 1e-12);
    assert!((reward::reward(1.7, 1.2) - 0.5).abs() < 1e-15);

    let secs = t.elapsed().as_secs_f64();
    let pass = secs < 1.0;
    verdict(1, pass, &format!("{} TD fixtures, max error {worst:e}; utility substitutions exact; {secs:.3}s", TD_CASES.len()));
    assert!(pass, "took {secs}s");
}

// ---------------------------------------------------------------------------
// 2. Fuzzy engine properties.

#[test]
fn criterion_2_fuzzy_properties() {
    let t = Instant::now();
    let mut rng = rng::stream(2, Stream::Environment);
    let rules = RuleBase::default_for(1000.0, 2.0);
    let partitions = [FuzzyPartition::workload_default(), FuzzyPartition::response_time_default(1000.0, 2.0)];
    let consequent_sets: Vec<Vec<f64>> = (0..50)
        .map(|_| (0..9).map(|_| f64::from(rng.random_range(-2..=2))).collect())
        .collect();
    let mut worst: f64 = 0.0;
    for k in 0..10_000 {
        for p in &partitions {
            let (lo, hi) = p.domain();
            let x = rng.random_range(lo - 10.0..hi + 10.0);
            let s: f64 = p.memberships(x).iter().sum();
            worst = worst.max((s - 1.0).abs());
        }
        let crisp = [rng.random_range(0.0..100.0), rng.random_range(0.0..4000.0)];
        let firing = rules.fuzzify(&crisp);
        worst = worst.max((firing.sum() - 1.0).abs());
        assert!(firing.fired().count() <= 4);

        let a = &consequent_sets[k % consequent_sets.len()];
        let out = fuzzy::defuzzify(&firing, a);
        assert!((-2..=2).contains(&out), "defuzzified {out}");
        // Weighted average is affine in the consequents.
        let (scale, shift) = (rng.random_range(-3.0..3.0), rng.random_range(-5.0..5.0));
        let mapped: Vec<f64> = a.iter().map(|v| scale * v + shift).collect();
        let lhs = fuzzy::weighted_average(&firing, &mapped);
        let rhs = scale * fuzzy::weighted_average(&firing, a) + shift;
        assert!((lhs - rhs).abs() < 1e-9, "affine: {lhs} vs {rhs}");
        // Integer shifts move the crisp output by exactly that shift away from ties.
        let avg = fuzzy::weighted_average(&firing, a);
        if (avg - avg.trunc()).abs() != 0.5 {
            let c = f64::from(rng.random_range(-3..=3));
            let shifted: Vec<f64> = a.iter().map(|v| v + c).collect();
            assert_eq!(fuzzy::defuzzify(&firing, &shifted), out + c as i32);
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = worst <= 1e-12 && secs < 5.0;
    verdict(2, pass, &format!("10^4 inputs, max |sum - 1| = {worst:e}; outputs in [-2, 2]; affine shift holds; {secs:.2}s"));
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 3. Single-state convergence.

fn single_state_run(rewards: [f64; 5], steps: usize, seed: u64) -> QTable {
    let table = QTable::new(1, ActionSet::default(), 0.1, 0.8).unwrap();
    let mut learner = Learner::new(
        table,
        ExplorationStrategy::preset(StrategyKind::S4),
        ConvergenceMonitor::default(),
    );
    let mut rng = rng::stream(seed, Stream::Agent);
    let f = FiringVector::singleton(1, 0);
    for _ in 0..steps {
        let d = learner.decide(&f, &mut rng);
        let r = rewards[d.chosen.actions[0]];
        learner.learn(&d.chosen, r, &f);
    }
    learner.table
}

#[test]
fn criterion_3_single_state_convergence() {
    let t = Instant::now();
    let gamma = 0.8;
    let mut worst: f64 = 0.0;
    // Identical rewards: every cell tends to r / (1 - gamma).
    let q = single_state_run([0.5; 5], 10_000, 3);
    for j in 0..5 {
        worst = worst.max((q.get(0, j) - 0.5 / (1.0 - gamma)).abs() / (0.5 / (1.0 - gamma)));
    }
    // Distinct rewards: the best cell tends to r* / (1 - gamma), the others
    // to r_j + gamma * r* / (1 - gamma).
    let rewards = [0.1, -0.2, 0.5, 0.3, 0.0];
    let q = single_state_run(rewards, 10_000, 4);
    let best = 0.5 / (1.0 - gamma);
    for (j, r) in rewards.iter().enumerate() {
        let want = if j == 2 { best } else { r + gamma * best };
        worst = worst.max((q.get(0, j) - want).abs() / want.abs());
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = worst < 0.01 && secs < 10.0;
    verdict(3, pass, &format!("max relative error {worst:.2e} after 10^4 steps; {secs:.2}s"));
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 4. Policy recovery on the frozen environment.

/// Mean reward of every (state, action) cell over `samples` episodes, and
/// the per-state argmax with its margin over the runner-up in standard
/// errors.
fn brute_force(env: &StationaryEnv, samples: u64) -> (Vec<i32>, Vec<f64>) {
    let deltas = env.rules.actions().as_slice().to_vec();
    let mut policy = Vec::new();
    let mut margins = Vec::new();
    for s in 0..env.rules.n_rules() {
        let mut cells: Vec<(f64, f64, i32)> = Vec::new();
        for &d in &deltas {
            let xs: Vec<f64> = (0..samples).map(|k| env.sample_reward(s, d, rng::mix64(1_000_003 * s as u64 + k))).collect();
            let m = stats::mean(&xs).unwrap();
            let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (samples - 1) as f64;
            cells.push((m, (var / samples as f64).sqrt(), d));
        }
        cells.sort_by(|a, b| b.0.total_cmp(&a.0));
        let (best, second) = (cells[0], cells[1]);
        policy.push(best.2);
        margins.push((best.0 - second.0) / (best.1.powi(2) + second.1.powi(2)).sqrt().max(1e-12));
    }
    (policy, margins)
}

#[test]
fn criterion_4_policy_on_stationary_environment() {
    let t = Instant::now();
    let env = StationaryEnv::default_scenario();
    let (oracle, margins) = brute_force(&env, 1000);
    let strict = margins.iter().all(|&m| m > 3.0);
    let mut matches = Vec::new();
    for seed in 0..20 {
        let table = QTable::new(9, env.rules.actions().clone(), 0.1, 0.8).unwrap();
        let out = env
            .train(table, ExplorationStrategy::preset(StrategyKind::S1), ConvergenceMonitor::default(), 10_000, seed)
            .unwrap();
        matches.push(out.policy.iter().zip(&oracle).filter(|(a, b)| a == b).count() as f64);
    }
    let med = stats::median(&matches).unwrap();
    let pass = strict && med >= 8.0;
    verdict(
        4,
        pass,
        &format!(
            "oracle policy {oracle:?} (min margin {:.1} SE); S1 median {med}/9 rules over 20 seeds; {:.1}s",
            margins.iter().copied().fold(f64::INFINITY, f64::min),
            t.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 5. Strategy ordering across the workload patterns.

const LIGHT_APP: &str = include_str!("../../../configs/light_app.toml");

fn find<'a>(reports: &'a [ExperimentReport], s: &str, p: Pattern) -> &'a ExperimentReport {
    reports.iter().find(|r| r.strategy == s && r.pattern == p.as_str()).expect("grid cell present")
}

#[test]
fn criterion_5_strategy_ordering() {
    let t = Instant::now();
    let cfg = ExperimentConfig::from_toml_with_env(LIGHT_APP, std::iter::empty()).unwrap();
    assert!(cfg.seeds.len() >= 20);
    assert_eq!(cfg.strategies, StrategyChoice::ALL.to_vec());
    let reports = harness::run_grid(&cfg, None).unwrap();
    assert_eq!(reports.len(), 36);
    assert!(reports.iter().all(|r| r.failures.is_empty()));
    print!("{}", harness::text_table(&reports));

    let patterns = Pattern::ALL;
    let conv = |s: &str| patterns.iter().filter(|&&p| find(&reports, s, p).convergence_step.is_some()).count();
    let (c1, c2, c4) = (conv("S1"), conv("S2"), conv("S4"));
    let a = c4 == 0 && c1 == 6 && c2 == 6;
    println!("  5a: median convergence present on S1 {c1}/6, S2 {c2}/6, S4 {c4}/6 patterns");

    let u = |s: &str, p: Pattern| find(&reports, s, p).cumulative_utility;
    let (u1, u2) = (u("S1", Pattern::QuicklyVarying), u("S2", Pattern::QuicklyVarying));
    let b = u1 >= u2;
    println!("  5b: quickly_varying utility S1 {u1:.1} vs S2 {u2:.1}");

    let wins: Vec<usize> = ["S1", "S2", "S3"]
        .iter()
        .map(|s| patterns.iter().filter(|&&p| u(s, p) >= u("S5", p)).count())
        .collect();
    let c = wins.iter().all(|&w| w >= 4);
    println!("  5c: patterns where utility >= S5: S1 {}, S2 {}, S3 {}", wins[0], wins[1], wins[2]);

    let p95 = |s: &str, p: Pattern| find(&reports, s, p).rt_p95_ms;
    let d_wins = patterns.iter().filter(|&&p| p95("S5", p) < p95("azure", p)).count();
    let d = d_wins >= 4;
    println!("  5d: S5 p95 below the threshold baseline on {d_wins}/6 patterns");

    let secs = t.elapsed().as_secs_f64();
    let flag = |ok: bool| if ok { "ok" } else { "FAIL" };
    let pass = a && b && c && d && secs < 1800.0;
    verdict(5, pass, &format!("5a {} 5b {} 5c {} 5d {}; {secs:.0}s", flag(a), flag(b), flag(c), flag(d)));
    assert!(pass, "strategy ordering: 5a {a} 5b {b} 5c {c} 5d {d}");
}

// ---------------------------------------------------------------------------
// 6. Simulator integrity.

#[test]
fn criterion_6_simulator_integrity() {
    let t = Instant::now();
    let cfg = SimConfig { initial_nodes: 3, seed: 6, ..SimConfig::default() };
    let mut sim = ClusterSim::new(cfg).unwrap();
    let mut rng = rng::stream(6, Stream::Workload);
    let (mut next_id, mut window_end, mut violations) = (0u64, 0u64, 0u64);
    let mut last_now = 0;
    while sim.events_processed() < 1_000_000 {
        // Feed one 10 s window of bursty arrivals and maybe a scaling request.
        let rate = rng.random_range(0..120);
        let mut batch: Vec<Request> = (0..rate)
            .map(|_| {
                next_id += 1;
                Request::new(next_id, window_end + rng.random_range(0..10_000), rng.random_range(0..=100))
            })
            .collect();
        batch.sort_by_key(|r| r.arrival_ms);
        sim.inject(batch);
        if !sim.in_flight() && rng.random_bool(0.3) {
            let d = controller::enforce(rng.random_range(-2..=2), sim.active_nodes(), &Default::default(), false);
            if d != 0 {
                sim.schedule_scaling(d, window_end).unwrap();
            }
        }
        window_end += 10_000;
        while sim.step(window_end).is_some() {
            if !sim.conservation_holds() {
                violations += 1;
            }
            assert!((cfg.node_min..=cfg.node_max).contains(&sim.active_nodes()));
            assert!(sim.now() >= last_now, "time went backwards");
            last_now = sim.now();
        }
        sim.advance(window_end);
        assert!(sim.conservation_holds());
    }
    let events = sim.events_processed();

    // Determinism of whole experiment logs, compared field by field and as bytes.
    let run_cfg = default_run_config(strategy_policy(StrategyKind::S1), 1000.0);
    let trace = workload::generate(Pattern::QuicklyVarying, 6 * 3600 * 1000, 11, &WorkloadParams::default()).unwrap();
    let a = controller::run(&run_cfg, &trace, 11).unwrap();
    let b = controller::run(&run_cfg, &trace, 11).unwrap();
    let same = a == b && serde_json::to_vec(&a).unwrap() == serde_json::to_vec(&b).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let pass = violations == 0 && events >= 1_000_000 && same && secs < 120.0;
    verdict(6, pass, &format!("{events} events, {violations} conservation violations; identical logs: {same}; {secs:.1}s"));
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 7. Delayed-feedback bookkeeping.

/// Violations of the feedback invariants in one log.
fn audit(log: &ExperimentLog, settle_ms: u64) -> Vec<String> {
    let mut bad = Vec::new();
    let mut last_resolved: Option<usize> = None;
    for l in &log.learning {
        let (before, after) = (&log.ticks[l.issued_tick], &log.ticks[l.resolved_tick]);
        if l.reward != after.utility - before.utility || l.reward != l.utility_after - l.utility_before {
            bad.push(format!("step {}: reward {} is not U(after) - U(before)", l.step, l.reward));
        }
        if before.raw_delta.is_none() || before.enforced_delta != l.delta {
            bad.push(format!("step {}: issuing tick carries no matching decision", l.step));
        }
        if after.reward != Some(l.reward) || after.dq != Some(l.delta_q) {
            bad.push(format!("step {}: resolving tick does not record the update", l.step));
        }
        if l.resolved_tick <= l.issued_tick || last_resolved.is_some_and(|r| l.issued_tick < r) {
            bad.push(format!("step {}: feedback windows overlap", l.step));
        }
        if log.ticks[l.issued_tick + 1..l.resolved_tick].iter().any(|t| t.raw_delta.is_some() || t.reward.is_some()) {
            bad.push(format!("step {}: another decision or update while feedback was open", l.step));
        }
        if l.delta != 0 {
            let (t0, t1) = (before.t_ms, after.t_ms);
            let enacted = log.node_timeline.iter().any(|&(t, _)| t > t0 && t + settle_ms <= t1);
            if !enacted {
                bad.push(format!("step {}: rewarded before enactment plus settling", l.step));
            }
        }
        last_resolved = Some(l.resolved_tick);
    }
    let updates = log.ticks.iter().filter(|t| t.reward.is_some()).count();
    if updates != log.learning.len() {
        bad.push(format!("{updates} ticks carry rewards but {} updates were logged", log.learning.len()));
    }
    if log.max_in_flight > 1 {
        bad.push("more than one change in flight".into());
    }
    if log.node_timeline.iter().any(|&(_, n)| !(1..=7).contains(&n)) {
        bad.push("node count left [1, 7]".into());
    }
    bad
}

#[test]
fn criterion_7_feedback_bookkeeping() {
    let t = Instant::now();
    let cfg = ExperimentConfig::default();
    let mut violations = Vec::new();
    let (mut runs, mut updates) = (0, 0);
    for choice in StrategyChoice::ALL {
        for (k, pattern) in [Pattern::BigSpike, Pattern::QuicklyVarying, Pattern::SteepTriPhase].into_iter().enumerate() {
            let log = harness::run_cell(&cfg, choice, pattern, k as u64).unwrap();
            if !choice.learns() {
                assert!(log.learning.is_empty());
            }
            updates += log.learning.len();
            runs += 1;
            violations.extend(audit(&log, cfg.controller.interval_ms).into_iter().map(|v| format!("{choice} {pattern}: {v}")));
        }
    }
    let pass = violations.is_empty() && updates > 0;
    verdict(7, pass, &format!("{runs} runs, {updates} audited updates, {} violations; {:.1}s", violations.len(), t.elapsed().as_secs_f64()));
    assert!(pass, "{:#?}", &violations[..violations.len().min(10)]);
}

// ---------------------------------------------------------------------------
// 8. Q-table size.

fn five_set_partition(label: &str, span: f64) -> FuzzyPartition {
    let step = span / 4.0;
    let sets = (0..5)
        .map(|k| {
            let c = k as f64 * step;
            let shape = match k {
                0 => Shape::Trapezoidal(0.0, 0.0, 0.0, step),
                4 => Shape::Trapezoidal(span - step, span, span, span),
                _ => Shape::Triangular(c - step, c, c + step),
            };
            FuzzySet::new(format!("{label}{k}"), shape).unwrap()
        })
        .collect();
    FuzzyPartition::new(label, (0.0, span), sets).unwrap()
}

#[test]
fn criterion_8_table_size() {
    let rules = RuleBase::default_for(1000.0, 2.0);
    let j = rules.actions().len();
    let default = QTable::new(rules.n_rules(), rules.actions().clone(), 0.1, 0.8).unwrap();
    let default_ok = rules.n_rules() == 9 && j == 5 && default.cells() == 45 && default.values().len() == 45;

    let big = RuleBase::full_product(
        vec![five_set_partition("w", 50.0), five_set_partition("rt", 4000.0)],
        ActionSet::default(),
    )
    .unwrap();
    let table = QTable::new(big.n_rules(), big.actions().clone(), 0.1, 0.8).unwrap();
    let mut run_cfg = default_run_config(strategy_policy(StrategyKind::S1), 1000.0);
    run_cfg.rules = big.clone();
    run_cfg.controller.fixed_rules = vec![0; 25];
    let trace = workload::generate(Pattern::DualPhase, 3600 * 1000, 8, &WorkloadParams::default()).unwrap();
    let log = controller::run(&run_cfg, &trace, 8).unwrap();
    let learned = log.final_q.as_ref().map(Vec::len);
    let stress_ok = big.n_rules() == 25 && table.cells() == 25 * j && learned == Some(25 * j);
    let pass = default_ok && stress_ok;
    verdict(8, pass, &format!("default {}x{j} = {} cells; 5x5 sets {}x{j} = {} cells (run kept {learned:?})", rules.n_rules(), default.cells(), big.n_rules(), table.cells()));
    assert!(pass);
}
