//! Shared fixtures for the benchmarks.

use vacqnet_core::sim::SimConfig;
use vacqnet_core::{Strategy, SystemConfig};

/// The three-class default network at a given threshold.
pub fn network(theta_db: f64, strategy: Strategy) -> SystemConfig {
    SystemConfig {
        theta_db,
        strategy,
        ..SystemConfig::default()
    }
}

/// A small torus with a single realization.
pub fn short_campaign(slots: usize) -> SimConfig {
    SimConfig {
        area_km: 1.5,
        realizations: 1,
        slots,
        warmup_max_slots: 0,
        ..SimConfig::default()
    }
}
