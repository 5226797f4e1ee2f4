//! The JSON run document: a `system` block plus per-mode controls.

use std::path::Path;

use serde::{Deserialize, Serialize};
use vacqnet_core::sim::SimConfig;
use vacqnet_core::{Strategy, SystemConfig};

use crate::CliError;

pub const DEFAULT_BISECTION_STEPS: usize = 12;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Analyze,
    Sweep,
    Frontier,
    Simulate,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Analyze => "analyze",
            Mode::Sweep => "sweep",
            Mode::Frontier => "frontier",
            Mode::Simulate => "simulate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    /// Evenly spaced in decibels, i.e. geometric in linear units.
    Db,
}

/// An inclusive grid over one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub parameter: String,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    #[serde(default)]
    pub scale: Scale,
}

impl AxisSpec {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        if self.steps < 2 {
            return Err(CliError::Config(format!(
                "axis `{}` needs at least 2 steps, got {}",
                self.parameter, self.steps
            )));
        }
        if !self.from.is_finite() || !self.to.is_finite() || self.from == self.to {
            return Err(CliError::Config(format!(
                "axis `{}` has an empty range [{}, {}]",
                self.parameter, self.from, self.to
            )));
        }
        let (a, b) = match self.scale {
            Scale::Linear => (self.from, self.to),
            Scale::Db => {
                if self.from <= 0.0 || self.to <= 0.0 {
                    return Err(CliError::Config(format!(
                        "dB-scaled axis `{}` needs positive bounds",
                        self.parameter
                    )));
                }
                (self.from.log10(), self.to.log10())
            }
        };
        let last = (self.steps - 1) as f64;
        Ok((0..self.steps)
            .map(|i| {
                let t = a + (b - a) * i as f64 / last;
                match self.scale {
                    Scale::Linear => t,
                    Scale::Db => 10f64.powf(t),
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpec {
    pub parameter: String,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontierSpec {
    pub grid: AxisSpec,
    pub search: SearchSpec,
    #[serde(default = "default_bisection_steps")]
    pub bisection_steps: usize,
    /// Strategies to trace; defaults to the system strategy.
    #[serde(default)]
    pub strategies: Vec<Strategy>,
}

fn default_bisection_steps() -> usize {
    DEFAULT_BISECTION_STEPS
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional guard: must match the subcommand when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<AxisSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frontier: Option<FrontierSpec>,
    #[serde(default)]
    pub simulation: SimConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run config serializes")
    }

    /// Rejects a config whose `mode` field names another subcommand.
    pub fn check_mode(&self, mode: Mode) -> Result<(), CliError> {
        match self.mode {
            Some(m) if m != mode => Err(CliError::Config(format!(
                "config is for `{}` but `{}` was requested",
                m.as_str(),
                mode.as_str()
            ))),
            _ => Ok(()),
        }
    }
}

/// Sets a named scalar parameter. Class-indexed names are 1-based
/// (`alpha1`, `queue_size2`).
pub fn set_parameter(cfg: &mut SystemConfig, name: &str, value: f64) -> Result<(), CliError> {
    let integer = |v: f64| -> Result<u64, CliError> {
        if v >= 0.0 && v.fract() == 0.0 {
            Ok(v as u64)
        } else {
            Err(CliError::Config(format!("`{name}` needs a non-negative integer, got {v}")))
        }
    };
    let class_index = |prefix: &str| -> Option<usize> {
        name.strip_prefix(prefix)?.parse::<usize>().ok().filter(|i| *i >= 1)
    };
    match name {
        "theta_db" => cfg.theta_db = value,
        "kappa" => cfg.kappa = value,
        "lambda_per_km2" => cfg.lambda_per_km2 = value,
        "eta" => cfg.eta = value,
        "rho_dbm" => cfg.rho_dbm = value,
        "sigma2_dbm" => cfg.sigma2_dbm = value,
        "channels" => {
            cfg.channels = u32::try_from(integer(value)?)
                .map_err(|_| CliError::Config(format!("channel count {value} too large")))?
        }
        _ => {
            if let Some(i) = class_index("alpha") {
                let slot = cfg.alphas.get_mut(i - 1).ok_or_else(|| no_class(name))?;
                *slot = value;
            } else if let Some(i) = class_index("queue_size") {
                let k = integer(value)? as usize;
                let slot = cfg.queue_sizes.get_mut(i - 1).ok_or_else(|| no_class(name))?;
                *slot = k;
            } else {
                return Err(CliError::Config(format!("unknown parameter `{name}`")));
            }
        }
    }
    Ok(())
}

fn no_class(name: &str) -> CliError {
    CliError::Config(format!("`{name}` refers to a class that is not configured"))
}
