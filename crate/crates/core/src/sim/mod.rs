//! Slot-level Monte Carlo simulation of the network on a square torus.
//!
//! Base stations and devices are independent Poisson point processes. Each
//! device keeps one FIFO queue per class, transmits at most one packet per
//! slot on a uniformly chosen channel of its pool, and succeeds when the SINR
//! at its serving base station clears the threshold. Fades are redrawn every
//! slot for every transmitter/base-station pair.

mod campaign;
mod engine;
mod realization;
mod stats;

pub use campaign::{derive_seeds, run_campaign, run_campaign_with_events};
pub use engine::{simulate, simulate_with_events, DepartureEvent};
pub use realization::{generate_realization, NetworkRealization};
pub use stats::{ClassSimStats, SimStats};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Expected base-station count below which edge effects are logged.
pub const MIN_EXPECTED_BS: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Side of the square torus.
    pub area_km: f64,
    pub realizations: usize,
    /// Measured slots per realization, after warm-up.
    pub slots: usize,
    /// Warm-up window length in slots.
    pub warmup_window: usize,
    /// Max-norm change of the per-class idle fractions between two windows
    /// that ends the warm-up.
    pub warmup_tolerance: f64,
    /// Warm-up slot budget; statistics are flagged non-stationary past it.
    pub warmup_max_slots: usize,
    /// Batches per realization for the confidence half-widths.
    pub batches: usize,
    /// Replace the SINR test with per-class Bernoulli successes.
    pub fixed_coverage: Option<Vec<f64>>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            area_km: 3.0,
            realizations: 20,
            slots: 3000,
            warmup_window: 500,
            warmup_tolerance: 1e-3,
            warmup_max_slots: 10_000,
            batches: 10,
            fixed_coverage: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.area_km > 0.0) || !self.area_km.is_finite() {
            return bad(format!("area side {} km must be positive", self.area_km));
        }
        if self.realizations == 0 || self.slots == 0 {
            return bad("realizations and slots must both be at least 1".into());
        }
        if self.warmup_window == 0 || !(self.warmup_tolerance > 0.0) {
            return bad("warm-up window and tolerance must be positive".into());
        }
        if self.batches == 0 || self.batches > self.slots {
            return bad(format!(
                "{} batches do not fit in {} slots",
                self.batches, self.slots
            ));
        }
        if let Some(p) = &self.fixed_coverage {
            if p.len() != num_classes {
                return bad(format!(
                    "{} fixed coverage values for {num_classes} classes",
                    p.len()
                ));
            }
            if let Some(v) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return bad(format!("fixed coverage {v} outside [0, 1]"));
            }
        }
        Ok(())
    }
}
