//! Per-class queueing analysis of prioritised uplink IoT traffic in a
//! large-scale cellular network, coupled to stochastic-geometry coverage
//! through a fixed point, plus a slot-level Monte Carlo simulator.

// `!(x > 0.0)` is used on purpose so NaN fails validation too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod coverage;
pub mod error;
pub mod fixed_point;
pub mod linalg;
pub mod metrics;
pub mod priority_chain;
pub mod sim;
pub mod steady_state;

pub use config::{SolveMethod, Strategy, SystemConfig};
pub use error::{Error, Result};
pub use fixed_point::{solve_network, NetworkSolution};
pub use metrics::ClassMetrics;
pub use priority_chain::{PhDistribution, QbdBlocks, TrafficClass};
pub use sim::{SimConfig, SimStats};
pub use steady_state::{OverflowCheck, SteadyState};
