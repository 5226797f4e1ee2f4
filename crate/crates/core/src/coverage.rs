//! Stochastic-geometry coverage probability of an uplink transmission under
//! full channel-inversion power control.
//!
//! Inter-cell interference enters through the Gauss hypergeometric term
//! `2F1(1, 1 - 2/eta; 2 - 2/eta; -theta)`; intra-cell interference through a
//! gamma-approximated Voronoi cell area with shape constant [`VORONOI_C`].
//! Both are weighted by the density of active co-channel devices,
//! `activity * kappa`.

use crate::config::{Strategy, SystemConfig};
use crate::error::{Error, Result};

/// Shape constant of the gamma approximation to the PPP Voronoi cell area.
pub const VORONOI_C: f64 = 3.575;

const HYP_TOL: f64 = 1e-16;
const QUAD_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams {
    /// Path-loss exponent, > 2.
    pub eta: f64,
    /// Power-control target in watts.
    pub rho: f64,
    /// Noise power in watts.
    pub sigma2: f64,
    /// Linear SINR threshold.
    pub theta: f64,
    pub c: f64,
}

impl RadioParams {
    pub fn from_config(cfg: &SystemConfig) -> Self {
        RadioParams {
            eta: cfg.eta,
            rho: cfg.rho_watts(),
            sigma2: cfg.sigma2_watts(),
            theta: cfg.theta(),
            c: VORONOI_C,
        }
    }

    /// `exp(-sigma2 theta / rho)`: the interference-free coverage.
    pub fn noise_only_coverage(&self) -> f64 {
        (-self.sigma2 * self.theta / self.rho).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadParams {
    /// Devices per base station per channel.
    pub kappa: f64,
    /// Fraction of devices transmitting on the channel pool.
    pub activity: f64,
}

/// Gauss series `sum (a)_n (b)_n / ((c)_n n!) z^n` for `|z| < 1`.
pub fn hyp2f1_series(a: f64, b: f64, c: f64, z: f64) -> f64 {
    assert!(z.abs() < 1.0, "series needs |z| < 1, got {z}");
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..200_000 {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * z;
        sum += term;
        if term.abs() <= HYP_TOL * sum.abs() {
            break;
        }
    }
    sum
}

/// `2 theta^{2/eta} * int_{theta^{-1/eta}}^inf y / (y^eta + 1) dy`.
///
/// Evaluated as `2 theta / (eta - 2) * int_0^1 ds / (1 + theta s^q)` with
/// `q = eta / (eta - 2)`, whose integrand is bounded and smooth on `[0, 1]`.
pub fn interference_integral_quadrature(theta: f64, eta: f64) -> Result<f64> {
    let q = eta / (eta - 2.0);
    let integrand = |s: f64| 1.0 / (1.0 + theta * s.powf(q));
    // The integral lies in [1 / (1 + theta), 1].
    let target = QUAD_REL_TOL / (1.0 + theta);
    let out = quadrature::integrate(integrand, 0.0, 1.0, target);
    if !(out.error_estimate <= 1e3 * target) || !out.integral.is_finite() {
        return Err(Error::Quadrature(out.error_estimate));
    }
    Ok(2.0 * theta / (eta - 2.0) * out.integral)
}

/// `2F1(1, 1 - 2/eta; 2 - 2/eta; -theta)`.
///
/// For `theta < 1` the Pfaff transform turns this into a positive series in
/// `theta / (1 + theta) < 1/2`; otherwise the integral representation is used.
pub fn gauss_2f1_interference(theta: f64, eta: f64) -> Result<f64> {
    if !(eta > 2.0) || !(theta >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "2F1 interference term needs theta >= 0 and eta > 2 (theta {theta}, eta {eta})"
        )));
    }
    if theta == 0.0 {
        return Ok(1.0);
    }
    let c = 2.0 - 2.0 / eta;
    if theta < 1.0 {
        let w = theta / (1.0 + theta);
        Ok(hyp2f1_series(1.0, 1.0, c, w) / (1.0 + theta))
    } else {
        Ok(interference_integral_quadrature(theta, eta)? * (eta - 2.0) / (2.0 * theta))
    }
}

/// Coverage probability for an active co-channel density `activity * kappa`.
pub fn coverage_probability(radio: &RadioParams, load: &LoadParams) -> Result<f64> {
    let weight = load.activity * load.kappa;
    let theta = radio.theta;
    let inter = 2.0 * theta * weight / (radio.eta - 2.0) * gauss_2f1_interference(theta, radio.eta)?;
    let intra = (1.0 + theta * weight / ((1.0 + theta) * radio.c)).powf(radio.c);
    Ok((-radio.sigma2 * theta / radio.rho - inter).exp() / intra)
}

/// The `eta = 4` closed form, where the hypergeometric term reduces to
/// `sqrt(theta) atan(sqrt(theta))`.
pub fn coverage_probability_eta4(radio: &RadioParams, load: &LoadParams) -> f64 {
    let weight = load.activity * load.kappa;
    let st = radio.theta.sqrt();
    let intra = (1.0 + radio.theta * weight / ((1.0 + radio.theta) * radio.c)).powf(radio.c);
    (-radio.sigma2 * radio.theta / radio.rho - weight * st * st.atan()).exp() / intra
}

/// Channels available to each class (fractional; analytical use).
pub fn channel_split(strategy: Strategy, channels: f64, alphas: &[f64]) -> Result<Vec<f64>> {
    let n = alphas.len();
    match strategy {
        Strategy::Shared | Strategy::PriorityAgnostic => Ok(vec![channels; n]),
        Strategy::DedicatedEa => Ok(vec![channels / n as f64; n]),
        Strategy::DedicatedWa => {
            let total: f64 = alphas.iter().sum();
            if total <= 0.0 {
                return Err(Error::InvalidConfig(
                    "weighted allocation needs at least one positive arrival probability".into(),
                ));
            }
            Ok(alphas.iter().map(|a| channels * a / total).collect())
        }
    }
}

/// Integer channel pools for the simulator: largest-remainder rounding of the
/// fractional split with at least one channel per class.
pub fn integer_channel_split(strategy: Strategy, channels: u32, alphas: &[f64]) -> Result<Vec<u32>> {
    let n = alphas.len();
    if !strategy.is_dedicated() {
        return Ok(vec![channels; n]);
    }
    if (channels as usize) < n {
        return Err(Error::InvalidConfig(format!(
            "{channels} channels cannot be dedicated to {n} classes"
        )));
    }
    let spare = channels - n as u32;
    let shares = channel_split(strategy, f64::from(spare), alphas)?;
    let mut counts: Vec<u32> = shares.iter().map(|s| s.floor() as u32).collect();
    let mut left = spare - counts.iter().sum::<u32>();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps the higher-priority class first on ties.
    order.sort_by(|&a, &b| {
        let ra = shares[a] - shares[a].floor();
        let rb = shares[b] - shares[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal)
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    Ok(counts.into_iter().map(|c| c + 1).collect())
}

/// `kappa_i = mu / (lambda C_i)` for every class.
pub fn class_kappas(cfg: &SystemConfig) -> Result<Vec<f64>> {
    let pools = channel_split(cfg.strategy, f64::from(cfg.channels), &cfg.alphas)?;
    let per_bs = cfg.mu_per_km2() / cfg.lambda_per_km2;
    Ok(pools
        .iter()
        .map(|&c| if c > 0.0 { per_bs / c } else { f64::INFINITY })
        .collect())
}
