//! Network and traffic configuration shared by the analytical solver and the
//! Monte Carlo simulator.
//!
//! Radio quantities are stored in the units they are usually quoted in
//! (dB, dBm); every consumer converts to linear units through the accessor
//! methods so the conversion lives in exactly one place.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::priority_chain::TrafficClass;

/// Channel access strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Every class draws from the full channel pool.
    Shared,
    /// Each class owns `C / N` channels.
    DedicatedEa,
    /// Each class owns a share of the channels proportional to its arrival probability.
    DedicatedWa,
    /// Single FCFS order across classes over the full pool. Simulation only.
    PriorityAgnostic,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Shared => "shared",
            Strategy::DedicatedEa => "dedicated-ea",
            Strategy::DedicatedWa => "dedicated-wa",
            Strategy::PriorityAgnostic => "priority-agnostic",
        }
    }

    pub fn is_dedicated(self) -> bool {
        matches!(self, Strategy::DedicatedEa | Strategy::DedicatedWa)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared" => Ok(Strategy::Shared),
            "dedicated-ea" => Ok(Strategy::DedicatedEa),
            "dedicated-wa" => Ok(Strategy::DedicatedWa),
            "priority-agnostic" => Ok(Strategy::PriorityAgnostic),
            other => Err(Error::InvalidConfig(format!("unknown strategy `{other}`"))),
        }
    }
}

/// Which stationary solver the fixed point uses for the per-class chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    /// Dense linear solve of the full transition matrix.
    Direct,
    /// Level-by-level matrix-analytic reduction; falls back to `Direct` on failure.
    #[default]
    Mam,
}

/// All network and traffic parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    /// Per-slot arrival probability of each class, highest priority first.
    pub alphas: Vec<f64>,
    /// Buffer size of each class.
    pub queue_sizes: Vec<usize>,
    /// Base-station density.
    pub lambda_per_km2: f64,
    /// Average number of devices per base station per channel (`mu / (lambda C)`).
    pub kappa: f64,
    /// Total number of orthogonal channels.
    pub channels: u32,
    /// Path-loss exponent.
    pub eta: f64,
    /// Power-control target at the serving base station.
    pub rho_dbm: f64,
    pub sigma2_dbm: f64,
    /// SINR decoding threshold.
    pub theta_db: f64,
    pub strategy: Strategy,
    /// Max-norm tolerance on successive stationary vectors.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Relaxation factor on the coverage update, in (0, 1].
    pub damping: f64,
    /// Stop iterating as soon as any class violates the non-overflow drift
    /// condition (with `delta = 0`), instead of only flagging it.
    pub strict_overflow_break: bool,
    pub solve_method: SolveMethod,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            alphas: vec![0.1, 0.25, 0.35],
            queue_sizes: vec![8, 8, 8],
            lambda_per_km2: 10.0,
            kappa: 1.0,
            channels: 64,
            eta: 4.0,
            rho_dbm: -90.0,
            sigma2_dbm: -90.0,
            theta_db: -18.0,
            strategy: Strategy::Shared,
            epsilon: 1e-8,
            max_iterations: 500,
            damping: 1.0,
            strict_overflow_break: false,
            solve_method: SolveMethod::Mam,
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * db_to_linear(dbm)
}

impl SystemConfig {
    pub fn num_classes(&self) -> usize {
        self.alphas.len()
    }

    pub fn theta(&self) -> f64 {
        db_to_linear(self.theta_db)
    }

    pub fn rho_watts(&self) -> f64 {
        dbm_to_watts(self.rho_dbm)
    }

    pub fn sigma2_watts(&self) -> f64 {
        dbm_to_watts(self.sigma2_dbm)
    }

    /// Device density implied by `kappa`, `lambda` and the channel count.
    pub fn mu_per_km2(&self) -> f64 {
        self.kappa * self.lambda_per_km2 * f64::from(self.channels)
    }

    pub fn classes(&self) -> Vec<TrafficClass> {
        self.alphas
            .iter()
            .zip(&self.queue_sizes)
            .enumerate()
            .map(|(i, (&alpha, &k))| TrafficClass::new(i + 1, alpha, k))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.alphas.is_empty() {
            return bad("at least one traffic class is required".into());
        }
        if self.alphas.len() != self.queue_sizes.len() {
            return bad(format!(
                "{} arrival probabilities but {} queue sizes",
                self.alphas.len(),
                self.queue_sizes.len()
            ));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return bad(format!("arrival probability {a} outside [0, 1]"));
        }
        if self.queue_sizes.contains(&0) {
            return bad("queue sizes must be at least 1".into());
        }
        if !(self.eta > 2.0) {
            return bad(format!("path-loss exponent {} must exceed 2", self.eta));
        }
        if self.channels == 0 {
            return bad("at least one channel is required".into());
        }
        if !(self.lambda_per_km2 > 0.0) || !(self.kappa >= 0.0) {
            return bad("lambda must be positive and kappa non-negative".into());
        }
        for (name, v) in [
            ("theta_db", self.theta_db),
            ("rho_dbm", self.rho_dbm),
            ("sigma2_dbm", self.sigma2_dbm),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        if !(self.epsilon > 0.0) || self.max_iterations == 0 {
            return bad("epsilon must be positive and max_iterations non-zero".into());
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad(format!("damping {} outside (0, 1]", self.damping));
        }
        Ok(())
    }
}
