use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::config::{Strategy, SystemConfig};
use crate::coverage::integer_channel_split;
use crate::error::Result;

use super::realization::NetworkRealization;
use super::stats::SimStats;
use super::SimConfig;

/// One delivered packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DepartureEvent {
    pub realization: usize,
    pub slot: u64,
    pub device: usize,
    /// 1-based class index.
    pub class: usize,
    pub wait_slots: u64,
    pub service_slots: u64,
}

#[derive(Debug, Clone, Copy)]
struct Transmission {
    device: usize,
    class: usize,
    channel: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct BatchCounts {
    device_slots: u64,
    free: u64,
    attempts: u64,
    successes: u64,
}

struct Engine<'a> {
    real: &'a NetworkRealization,
    alphas: Vec<f64>,
    queue_sizes: Vec<usize>,
    /// `(first channel, channel count)` per class.
    pools: Vec<(usize, usize)>,
    channels: usize,
    agnostic: bool,
    theta: f64,
    sigma2: f64,
    fixed: Option<Vec<f64>>,
    /// `P_u d(u, b)^{-eta}`, device-major.
    gain: Vec<f64>,
    queues: Vec<VecDeque<u64>>,
    head_since: Vec<u64>,
    rng: ChaCha8Rng,

    measuring: bool,
    stats: SimStats,
    batch: Vec<BatchCounts>,
    idle: Vec<u64>,
    events: Option<Vec<DepartureEvent>>,

    arrived: Vec<bool>,
    tx: Vec<Transmission>,
    by_channel: Vec<usize>,
    channel_start: Vec<usize>,
    signal: Vec<f64>,
    success: Vec<bool>,
    bs_stamp: Vec<usize>,
    bs_received: Vec<f64>,
    bs_list: Vec<usize>,
}

impl<'a> Engine<'a> {
    fn new(
        real: &'a NetworkRealization,
        cfg: &SystemConfig,
        sim: &SimConfig,
        seed: u64,
        record_events: bool,
    ) -> Result<Self> {
        let n = cfg.num_classes();
        let counts = integer_channel_split(cfg.strategy, cfg.channels, &cfg.alphas)?;
        let mut pools = Vec::with_capacity(n);
        let mut offset = 0;
        for &c in &counts {
            pools.push((offset, c as usize));
            if cfg.strategy.is_dedicated() {
                offset += c as usize;
            }
        }
        let devices = real.num_devices();
        let bs = real.num_base_stations();
        let mut gain = Vec::with_capacity(devices * bs);
        for u in 0..devices {
            for b in 0..bs {
                gain.push(path_gain(real.tx_power[u], real.distance(u, b), cfg.eta));
            }
        }
        Ok(Engine {
            real,
            alphas: cfg.alphas.clone(),
            queue_sizes: cfg.queue_sizes.clone(),
            pools,
            channels: cfg.channels as usize,
            agnostic: cfg.strategy == Strategy::PriorityAgnostic,
            theta: cfg.theta(),
            sigma2: cfg.sigma2_watts(),
            fixed: sim.fixed_coverage.clone(),
            gain,
            queues: vec![VecDeque::new(); devices * n],
            head_since: vec![0; devices * n],
            rng: ChaCha8Rng::seed_from_u64(seed),
            measuring: false,
            stats: SimStats::new(&cfg.queue_sizes),
            batch: vec![BatchCounts::default(); n],
            idle: vec![0; n],
            events: record_events.then(Vec::new),
            arrived: vec![false; devices * n],
            tx: Vec::new(),
            by_channel: Vec::new(),
            channel_start: vec![0; cfg.channels as usize + 1],
            signal: Vec::new(),
            success: Vec::new(),
            bs_stamp: vec![usize::MAX; bs],
            bs_received: vec![0.0; bs],
            bs_list: Vec::new(),
        })
    }

    fn classes(&self) -> usize {
        self.alphas.len()
    }

    fn record_occupancy(&mut self) {
        let n = self.classes();
        for u in 0..self.real.num_devices() {
            let mut higher_empty = true;
            for i in 0..n {
                let len = self.queues[u * n + i].len();
                if len == 0 {
                    self.idle[i] += 1;
                }
                if self.measuring {
                    let c = &mut self.stats.classes[i];
                    c.device_slots += 1;
                    c.level_counts[len] += 1;
                    self.batch[i].device_slots += 1;
                    if higher_empty {
                        c.server_free_slots += 1;
                        self.batch[i].free += 1;
                    }
                }
                higher_empty &= len == 0;
            }
        }
    }

    fn draw_arrivals(&mut self) {
        let n = self.classes();
        for u in 0..self.real.num_devices() {
            for i in 0..n {
                self.arrived[u * n + i] = self.rng.random_bool(self.alphas[i]);
            }
        }
    }

    /// Class transmitted by device `u` this slot, from the pre-arrival queues.
    fn select_class(&mut self, u: usize) -> Option<usize> {
        let n = self.classes();
        let q = &self.queues[u * n..(u + 1) * n];
        if !self.agnostic {
            for (i, queue) in q.iter().enumerate() {
                if !queue.is_empty() {
                    return Some(i);
                }
                if self.arrived[u * n + i] {
                    return None;
                }
            }
            return None;
        }
        let oldest = q.iter().filter_map(|c| c.front()).min()?;
        let tied: Vec<usize> = (0..n).filter(|&i| q[i].front() == Some(oldest)).collect();
        Some(if tied.len() == 1 {
            tied[0]
        } else {
            tied[self.rng.random_range(0..tied.len())]
        })
    }

    fn resolve_transmissions(&mut self) {
        let c_total = self.channels;
        self.channel_start.iter_mut().for_each(|s| *s = 0);
        for t in &self.tx {
            self.channel_start[t.channel + 1] += 1;
        }
        for c in 0..c_total {
            self.channel_start[c + 1] += self.channel_start[c];
        }
        let mut fill = self.channel_start.clone();
        self.by_channel.resize(self.tx.len(), 0);
        for (idx, t) in self.tx.iter().enumerate() {
            self.by_channel[fill[t.channel]] = idx;
            fill[t.channel] += 1;
        }
        self.signal.clear();
        self.signal.resize(self.tx.len(), 0.0);
        self.success.clear();
        self.success.resize(self.tx.len(), false);

        let bs = self.real.num_base_stations();
        for c in 0..c_total {
            let group = &self.by_channel[self.channel_start[c]..self.channel_start[c + 1]];
            if group.is_empty() {
                continue;
            }
            if self.measuring {
                let first = self.tx[group[0]].class;
                if group.iter().any(|&t| self.tx[t].class != first) {
                    self.stats.mixed_class_channel_slots += 1;
                }
            }
            if let Some(p) = &self.fixed {
                for &t in group {
                    self.success[t] = self.rng.random_bool(p[self.tx[t].class]);
                }
                continue;
            }
            self.bs_list.clear();
            for &t in group {
                let b = self.real.serving[self.tx[t].device];
                if self.bs_stamp[b] != c {
                    self.bs_stamp[b] = c;
                    self.bs_list.push(b);
                }
            }
            for &b in &self.bs_list {
                let mut total = 0.0;
                for &t in group {
                    let u = self.tx[t].device;
                    let fade: f64 = self.rng.sample(Exp1);
                    let received = self.gain[u * bs + b] * fade;
                    total += received;
                    if self.real.serving[u] == b {
                        self.signal[t] = received;
                    }
                }
                self.bs_received[b] = total;
            }
            for &t in group {
                let b = self.real.serving[self.tx[t].device];
                let s = self.signal[t];
                let interference = (self.bs_received[b] - s).max(0.0);
                self.success[t] = s >= self.theta * (interference + self.sigma2);
            }
        }
        // Reset stamps so channel indices can be reused next slot.
        for t in &self.tx {
            self.bs_stamp[self.real.serving[t.device]] = usize::MAX;
        }
    }

    fn run_slot(&mut self, slot: u64) {
        let n = self.classes();
        self.record_occupancy();
        self.draw_arrivals();

        self.tx.clear();
        for u in 0..self.real.num_devices() {
            if let Some(class) = self.select_class(u) {
                let (first, count) = self.pools[class];
                let channel = first + self.rng.random_range(0..count);
                self.tx.push(Transmission { device: u, class, channel });
            }
        }
        self.resolve_transmissions();

        for idx in 0..self.tx.len() {
            let Transmission { device, class, .. } = self.tx[idx];
            let q = device * n + class;
            let ok = self.success[idx];
            if self.measuring {
                self.stats.classes[class].attempts += 1;
                self.batch[class].attempts += 1;
                if ok {
                    self.stats.classes[class].successes += 1;
                    self.batch[class].successes += 1;
                }
            }
            if !ok {
                continue;
            }
            let arrival = self.queues[q].pop_front().expect("transmitting queue is non-empty");
            let head = self.head_since[q];
            let wait = head - arrival - 1;
            let service = slot - head + 1;
            if self.measuring {
                self.stats.classes[class].record_delay(wait, service);
                if let Some(events) = &mut self.events {
                    events.push(DepartureEvent {
                        realization: 0,
                        slot,
                        device,
                        class: class + 1,
                        wait_slots: wait,
                        service_slots: service,
                    });
                }
            }
            if !self.queues[q].is_empty() {
                self.head_since[q] = slot + 1;
            }
        }

        for u in 0..self.real.num_devices() {
            for i in 0..n {
                let q = u * n + i;
                if !self.arrived[q] {
                    continue;
                }
                let full = self.queues[q].len() >= self.queue_sizes[i];
                if self.measuring {
                    let c = &mut self.stats.classes[i];
                    c.arrivals += 1;
                    if full {
                        c.drops += 1;
                    }
                }
                if !full {
                    if self.queues[q].is_empty() {
                        self.head_since[q] = slot + 1;
                    }
                    self.queues[q].push_back(slot);
                }
            }
        }
    }

    fn close_batch(&mut self) {
        for (i, b) in self.batch.iter_mut().enumerate() {
            if b.attempts > 0 && b.device_slots > 0 {
                let gamma = b.free as f64 / b.device_slots as f64;
                let p = b.successes as f64 / b.attempts as f64;
                self.stats.classes[i].batch_tsp.push(gamma * p);
            }
            *b = BatchCounts::default();
        }
    }

    /// Runs warm-up windows until the idle fractions settle. Returns the next
    /// slot index and whether the criterion fired.
    fn warm_up(&mut self, sim: &SimConfig) -> (u64, bool) {
        let devices = self.real.num_devices().max(1) as f64;
        let mut slot = 0u64;
        let mut previous: Option<Vec<f64>> = None;
        while (slot as usize) < sim.warmup_max_slots {
            self.idle.iter_mut().for_each(|v| *v = 0);
            let window = sim.warmup_window.min(sim.warmup_max_slots - slot as usize);
            for _ in 0..window {
                self.run_slot(slot);
                slot += 1;
            }
            let fractions: Vec<f64> = self
                .idle
                .iter()
                .map(|&c| c as f64 / (devices * window as f64))
                .collect();
            self.stats.idle_trace.push(fractions.clone());
            if let Some(prev) = &previous {
                let change = prev
                    .iter()
                    .zip(&fractions)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                if change < sim.warmup_tolerance {
                    return (slot, true);
                }
            }
            previous = Some(fractions);
        }
        (slot, sim.warmup_max_slots == 0)
    }
}

fn path_gain(power: f64, distance: f64, eta: f64) -> f64 {
    if eta == 4.0 {
        let d2 = distance * distance;
        power / (d2 * d2)
    } else {
        power * distance.powf(-eta)
    }
}

/// Simulates one deployment for `sim.slots` measured slots after warm-up.
pub fn simulate(
    realization: &NetworkRealization,
    cfg: &SystemConfig,
    sim: &SimConfig,
    seed: u64,
) -> Result<SimStats> {
    run(realization, cfg, sim, seed, false).map(|(stats, _)| stats)
}

/// As [`simulate`], also returning every measured departure in slot order.
pub fn simulate_with_events(
    realization: &NetworkRealization,
    cfg: &SystemConfig,
    sim: &SimConfig,
    seed: u64,
) -> Result<(SimStats, Vec<DepartureEvent>)> {
    run(realization, cfg, sim, seed, true)
}

fn run(
    realization: &NetworkRealization,
    cfg: &SystemConfig,
    sim: &SimConfig,
    seed: u64,
    record_events: bool,
) -> Result<(SimStats, Vec<DepartureEvent>)> {
    cfg.validate()?;
    sim.validate(cfg.num_classes())?;
    let mut engine = Engine::new(realization, cfg, sim, seed, record_events)?;
    let (start, reached) = engine.warm_up(sim);
    if !reached {
        log::warn!(
            "warm-up did not settle within {} slots; statistics flagged non-stationary",
            sim.warmup_max_slots
        );
    }
    engine.measuring = true;
    let mut batch = 0;
    for t in 0..sim.slots {
        let b = t * sim.batches / sim.slots;
        if b != batch {
            engine.close_batch();
            batch = b;
        }
        engine.run_slot(start + t as u64);
    }
    engine.close_batch();

    let mut stats = engine.stats;
    for c in &mut stats.classes {
        let tsp = c.tsp();
        if tsp.is_finite() {
            c.realization_tsp.push(tsp);
        }
    }
    stats.realizations = 1;
    stats.measured_slots = sim.slots as u64;
    stats.warmup_slots = vec![start as usize];
    stats.warmup_reached = reached;
    stats.devices = realization.num_devices() as u64;
    Ok((stats, engine.events.unwrap_or_default()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lone_device(cfg: &SystemConfig) -> NetworkRealization {
        NetworkRealization::from_points(1.0, vec![[0.5, 0.5]], vec![[0.6, 0.5]], cfg.rho_watts(), cfg.eta)
            .unwrap()
    }

    #[test]
    fn queues_stay_within_bounds() {
        let cfg = SystemConfig {
            alphas: vec![0.9, 0.9],
            queue_sizes: vec![2, 3],
            ..SystemConfig::default()
        };
        let sim = SimConfig {
            slots: 400,
            warmup_max_slots: 0,
            fixed_coverage: Some(vec![0.2, 0.2]),
            ..SimConfig::default()
        };
        let real = lone_device(&cfg);
        let stats = simulate(&real, &cfg, &sim, 1).unwrap();
        for (c, k) in stats.classes.iter().zip([2, 3]) {
            assert_eq!(c.level_counts.len(), k + 1);
            assert!(c.drops > 0);
            assert!(c.drops <= c.arrivals);
        }
    }

    #[test]
    fn no_traffic_no_attempts() {
        let cfg = SystemConfig {
            alphas: vec![0.0],
            queue_sizes: vec![2],
            ..SystemConfig::default()
        };
        let sim = SimConfig {
            slots: 100,
            ..SimConfig::default()
        };
        let stats = simulate(&lone_device(&cfg), &cfg, &sim, 3).unwrap();
        assert_eq!(stats.classes[0].attempts, 0);
        assert_eq!(stats.classes[0].level_counts, vec![100, 0, 0]);
        assert!(stats.warmup_reached);
    }

    #[test]
    fn events_match_counters() {
        let cfg = SystemConfig {
            alphas: vec![0.3, 0.3],
            queue_sizes: vec![4, 4],
            ..SystemConfig::default()
        };
        let sim = SimConfig {
            slots: 500,
            warmup_max_slots: 0,
            fixed_coverage: Some(vec![0.9, 0.9]),
            ..SimConfig::default()
        };
        let (stats, events) = simulate_with_events(&lone_device(&cfg), &cfg, &sim, 5).unwrap();
        let delivered: u64 = stats.classes.iter().map(|c| c.delivered()).sum();
        assert_eq!(events.len() as u64, delivered);
        assert!(events.iter().all(|e| e.service_slots >= 1));
        assert!(events.windows(2).all(|w| w[0].slot <= w[1].slot));
    }
}
