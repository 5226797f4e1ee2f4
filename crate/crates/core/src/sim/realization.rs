use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::config::SystemConfig;
use crate::error::{Error, Result};

use super::MIN_EXPECTED_BS;

const MAX_EMPTY_DRAWS: usize = 1000;

/// One spatial deployment on a square torus of side `side_km`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRealization {
    pub side_km: f64,
    pub base_stations: Vec<[f64; 2]>,
    pub devices: Vec<[f64; 2]>,
    /// Index of each device's nearest base station.
    pub serving: Vec<usize>,
    /// Torus distance from each device to its serving base station.
    pub link_km: Vec<f64>,
    /// `rho r^eta` per device.
    pub tx_power: Vec<f64>,
}

impl NetworkRealization {
    /// Builds a deployment from given points with nearest-station association.
    pub fn from_points(
        side_km: f64,
        base_stations: Vec<[f64; 2]>,
        devices: Vec<[f64; 2]>,
        rho: f64,
        eta: f64,
    ) -> Result<Self> {
        if base_stations.is_empty() {
            return Err(Error::InvalidConfig("a deployment needs a base station".into()));
        }
        let mut serving = Vec::with_capacity(devices.len());
        let mut link_km = Vec::with_capacity(devices.len());
        for d in &devices {
            let (best, dist) = base_stations
                .iter()
                .enumerate()
                .map(|(b, bs)| (b, torus_distance(side_km, d, bs)))
                .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
            serving.push(best);
            link_km.push(dist);
        }
        let tx_power = link_km.iter().map(|r| rho * r.powf(eta)).collect();
        Ok(NetworkRealization {
            side_km,
            base_stations,
            devices,
            serving,
            link_km,
            tx_power,
        })
    }

    pub fn num_devices(&self) -> usize {
        self.devices.len()
    }

    pub fn num_base_stations(&self) -> usize {
        self.base_stations.len()
    }

    pub fn distance(&self, device: usize, bs: usize) -> f64 {
        torus_distance(self.side_km, &self.devices[device], &self.base_stations[bs])
    }
}

pub fn torus_distance(side: f64, a: &[f64; 2], b: &[f64; 2]) -> f64 {
    let wrap = |d: f64| {
        let d = d.abs() % side;
        d.min(side - d)
    };
    wrap(a[0] - b[0]).hypot(wrap(a[1] - b[1]))
}

fn poisson_points(rng: &mut ChaCha8Rng, mean: f64, side: f64) -> Vec<[f64; 2]> {
    let count = if mean > 0.0 {
        Poisson::new(mean).map_or(0, |p| p.sample(rng) as usize)
    } else {
        0
    };
    (0..count)
        .map(|_| [rng.random::<f64>() * side, rng.random::<f64>() * side])
        .collect()
}

/// Draws base stations at density `lambda` and devices at `mu = kappa lambda C`
/// on a `side_km x side_km` torus. Deployments without base stations are
/// redrawn.
pub fn generate_realization(cfg: &SystemConfig, side_km: f64, seed: u64) -> Result<NetworkRealization> {
    let area = side_km * side_km;
    let expected_bs = cfg.lambda_per_km2 * area;
    if expected_bs < MIN_EXPECTED_BS {
        log::warn!("only {expected_bs:.1} base stations expected; edge statistics will be noisy");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_EMPTY_DRAWS {
        let base_stations = poisson_points(&mut rng, expected_bs, side_km);
        if base_stations.is_empty() {
            continue;
        }
        let devices = poisson_points(&mut rng, cfg.mu_per_km2() * area, side_km);
        return NetworkRealization::from_points(
            side_km,
            base_stations,
            devices,
            cfg.rho_watts(),
            cfg.eta,
        );
    }
    Err(Error::InvalidConfig(format!(
        "no base station in {MAX_EMPTY_DRAWS} draws at {expected_bs:.3e} expected"
    )))
}
