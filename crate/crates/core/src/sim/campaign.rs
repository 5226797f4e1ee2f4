use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::SystemConfig;
use crate::error::Result;

use super::engine::{simulate, simulate_with_events, DepartureEvent};
use super::realization::generate_realization;
use super::stats::SimStats;
use super::SimConfig;

/// `(deployment seed, dynamics seed)` of realization `index`, drawn from its
/// own ChaCha stream under the master seed.
pub fn derive_seeds(master_seed: u64, index: usize) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index as u64);
    (rng.next_u64(), rng.next_u64())
}

/// Runs `sim.realizations` independent deployments in parallel and merges
/// them in index order, so the result depends only on the master seed.
pub fn run_campaign(cfg: &SystemConfig, sim: &SimConfig, master_seed: u64) -> Result<SimStats> {
    cfg.validate()?;
    sim.validate(cfg.num_classes())?;
    let parts: Vec<SimStats> = (0..sim.realizations)
        .into_par_iter()
        .map(|r| {
            let (geo, dyn_seed) = derive_seeds(master_seed, r);
            let real = generate_realization(cfg, sim.area_km, geo)?;
            simulate(&real, cfg, sim, dyn_seed)
        })
        .collect::<Result<_>>()?;
    Ok(merge_all(cfg, &parts))
}

/// As [`run_campaign`], also collecting every measured departure ordered by
/// realization, then slot.
pub fn run_campaign_with_events(
    cfg: &SystemConfig,
    sim: &SimConfig,
    master_seed: u64,
) -> Result<(SimStats, Vec<DepartureEvent>)> {
    cfg.validate()?;
    sim.validate(cfg.num_classes())?;
    let parts: Vec<(SimStats, Vec<DepartureEvent>)> = (0..sim.realizations)
        .into_par_iter()
        .map(|r| {
            let (geo, dyn_seed) = derive_seeds(master_seed, r);
            let real = generate_realization(cfg, sim.area_km, geo)?;
            let (stats, mut events) = simulate_with_events(&real, cfg, sim, dyn_seed)?;
            events.iter_mut().for_each(|e| e.realization = r);
            Ok((stats, events))
        })
        .collect::<Result<_>>()?;
    let stats: Vec<SimStats> = parts.iter().map(|(s, _)| s.clone()).collect();
    let events = parts.into_iter().flat_map(|(_, e)| e).collect();
    Ok((merge_all(cfg, &stats), events))
}

fn merge_all(cfg: &SystemConfig, parts: &[SimStats]) -> SimStats {
    let mut total = SimStats::new(&cfg.queue_sizes);
    for p in parts {
        total.merge(p);
    }
    total
}
