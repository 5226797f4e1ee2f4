/// Normal quantile for the 95 % half-widths.
const Z95: f64 = 1.959_963_984_540_054;

/// Counters of one class, summed over devices (and realizations once merged).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassSimStats {
    pub arrivals: u64,
    pub drops: u64,
    pub attempts: u64,
    pub successes: u64,
    pub device_slots: u64,
    /// Device-slots in which every higher-priority queue was empty.
    pub server_free_slots: u64,
    /// Slot-start occupancy histogram over `0..=k`.
    pub level_counts: Vec<u64>,
    /// Packet delay histogram, index in slots.
    pub delay_hist: Vec<u64>,
    pub wait_total: u64,
    pub service_total: u64,
    /// Per-batch `gamma p` estimates within each realization.
    pub batch_tsp: Vec<f64>,
    /// One `gamma p` estimate per realization.
    pub realization_tsp: Vec<f64>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        f64::NAN
    } else {
        num as f64 / den as f64
    }
}

impl ClassSimStats {
    pub fn new(queue_size: usize) -> Self {
        ClassSimStats {
            level_counts: vec![0; queue_size + 1],
            ..ClassSimStats::default()
        }
    }

    pub fn gamma(&self) -> f64 {
        ratio(self.server_free_slots, self.device_slots)
    }

    /// Empirical success probability per attempt.
    pub fn coverage(&self) -> f64 {
        ratio(self.successes, self.attempts)
    }

    pub fn tsp(&self) -> f64 {
        self.gamma() * self.coverage()
    }

    /// 95 % half-width of the TSP.
    ///
    /// Realizations differ in geometry, so batches of one deployment are not
    /// independent draws of the network average. With two or more
    /// realizations the per-realization estimates are used; a single run
    /// falls back to its batch means.
    pub fn tsp_half_width(&self) -> f64 {
        if self.realization_tsp.len() >= 2 {
            half_width(&self.realization_tsp)
        } else {
            half_width(&self.batch_tsp)
        }
    }

    pub fn level_pmf(&self) -> Vec<f64> {
        let total: u64 = self.level_counts.iter().sum();
        self.level_counts.iter().map(|&c| ratio(c, total)).collect()
    }

    pub fn mean_queue(&self) -> f64 {
        let total: u64 = self.level_counts.iter().sum();
        let area: u64 = self
            .level_counts
            .iter()
            .enumerate()
            .map(|(n, &c)| n as u64 * c)
            .sum();
        ratio(area, total)
    }

    pub fn delivered(&self) -> u64 {
        self.delay_hist.iter().sum()
    }

    pub fn mean_delay(&self) -> f64 {
        let total: u64 = self
            .delay_hist
            .iter()
            .enumerate()
            .map(|(d, &c)| d as u64 * c)
            .sum();
        ratio(total, self.delivered())
    }

    pub fn mean_wait(&self) -> f64 {
        ratio(self.wait_total, self.delivered())
    }

    pub fn mean_service(&self) -> f64 {
        ratio(self.service_total, self.delivered())
    }

    /// Generated packets per device-slot.
    pub fn arrival_rate(&self) -> f64 {
        ratio(self.arrivals, self.device_slots)
    }

    pub fn drop_rate(&self) -> f64 {
        ratio(self.drops, self.arrivals)
    }

    /// `1/alpha + E[W] + E[D]` from the empirical rates.
    pub fn paoi(&self) -> f64 {
        1.0 / self.arrival_rate() + self.mean_wait() + self.mean_service()
    }

    pub(crate) fn record_delay(&mut self, wait: u64, service: u64) {
        let delay = (wait + service) as usize;
        if self.delay_hist.len() <= delay {
            self.delay_hist.resize(delay + 1, 0);
        }
        self.delay_hist[delay] += 1;
        self.wait_total += wait;
        self.service_total += service;
    }

    pub fn merge(&mut self, other: &ClassSimStats) {
        self.arrivals += other.arrivals;
        self.drops += other.drops;
        self.attempts += other.attempts;
        self.successes += other.successes;
        self.device_slots += other.device_slots;
        self.server_free_slots += other.server_free_slots;
        add_into(&mut self.level_counts, &other.level_counts);
        add_into(&mut self.delay_hist, &other.delay_hist);
        self.wait_total += other.wait_total;
        self.service_total += other.service_total;
        self.batch_tsp.extend_from_slice(&other.batch_tsp);
        self.realization_tsp.extend_from_slice(&other.realization_tsp);
    }
}

fn half_width(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n < 2 {
        return f64::NAN;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Z95 * (var / n as f64).sqrt()
}

fn add_into(acc: &mut Vec<u64>, other: &[u64]) {
    if acc.len() < other.len() {
        acc.resize(other.len(), 0);
    }
    for (a, b) in acc.iter_mut().zip(other) {
        *a += b;
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimStats {
    pub classes: Vec<ClassSimStats>,
    pub realizations: usize,
    /// Measured slots summed over realizations.
    pub measured_slots: u64,
    /// Warm-up length of each realization.
    pub warmup_slots: Vec<usize>,
    /// False if any realization hit the warm-up budget.
    pub warmup_reached: bool,
    /// Per-window idle fractions seen during warm-up, realizations in order.
    pub idle_trace: Vec<Vec<f64>>,
    pub devices: u64,
    /// Measured channel-slots whose transmitters belonged to more than one class.
    pub mixed_class_channel_slots: u64,
}

impl SimStats {
    pub fn new(queue_sizes: &[usize]) -> Self {
        SimStats {
            classes: queue_sizes.iter().map(|&k| ClassSimStats::new(k)).collect(),
            warmup_reached: true,
            ..SimStats::default()
        }
    }

    pub fn tsp(&self) -> Vec<f64> {
        self.classes.iter().map(ClassSimStats::tsp).collect()
    }

    pub fn merge(&mut self, other: &SimStats) {
        if self.classes.is_empty() {
            self.classes = vec![ClassSimStats::default(); other.classes.len()];
        }
        for (a, b) in self.classes.iter_mut().zip(&other.classes) {
            a.merge(b);
        }
        self.realizations += other.realizations;
        self.measured_slots += other.measured_slots;
        self.warmup_slots.extend_from_slice(&other.warmup_slots);
        self.warmup_reached &= other.warmup_reached;
        self.idle_trace.extend(other.idle_trace.iter().cloned());
        self.devices += other.devices;
        self.mixed_class_channel_slots += other.mixed_class_channel_slots;
    }
}
