//! Self-learning fuzzy auto-scaling.
//!
//! A zero-order Sugeno fuzzy controller maps the monitored workload and
//! response time of an elastic application onto a node delta. Its rule
//! consequents are learned online with fuzzy Q-learning, one q-value per
//! (rule, action) cell. The crate also carries a deterministic
//! discrete-event model of a queue/worker cluster with delayed scaling
//! enactment, synthetic workload generators and the MAPE-K loop that ties
//! the pieces together.
//!
//! Everything here is pure computation over `alloc` collections; reading
//! configs, writing logs and the command line live in the `fqscale` crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod baseline;
pub mod controller;
pub mod error;
pub mod fql;
pub mod fuzzy;
pub mod reward;
pub mod rng;
pub mod sim;
pub mod stationary;
pub mod stats;
pub mod workload;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::baseline::ThresholdRule;
    pub use crate::controller::{
        enforce, Controller, ControllerConfig, EnforcerConfig, ExperimentLog, PolicyKind,
    };
    pub use crate::fql::{
        ChosenActions, ConvergenceMonitor, ExplorationStrategy, QTable, StrategyKind,
    };
    pub use crate::fuzzy::{ActionSet, FiringVector, FuzzyPartition, FuzzySet, RuleBase, Shape};
    pub use crate::reward::{RewardWeights, SloConfig};
    pub use crate::sim::{ClusterSim, DelayModel, Observation, Request, ServiceModel, SimConfig};
    pub use crate::workload::{Pattern, WorkloadParams, WorkloadTrace};
}
