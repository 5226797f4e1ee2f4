//! Per-class performance indicators derived from a solved network.
//!
//! All delays are in slots. The waiting time `W` of a packet is the number of
//! slots until the packets ahead of it have departed; `D` is its own service
//! time; `E[W] + E[D]` is the packet delay.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::fixed_point::NetworkSolution;
use crate::linalg;
use crate::priority_chain::{PhDistribution, QbdBlocks};
use crate::steady_state::SteadyState;

/// Tail mass at which the default waiting-time truncation stops.
pub const WAIT_TAIL_TOL: f64 = 1e-9;
/// Hard cap on the waiting-time support.
pub const WAIT_MAX_SLOTS: usize = 100_000;

/// Truncated waiting-time distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct WaitingPmf {
    /// `P{W = n}` for `n = 0..pmf.len()`.
    pub pmf: Vec<f64>,
    /// `P{W >= pmf.len()}`.
    pub tail: f64,
}

impl WaitingPmf {
    pub fn n_max(&self) -> usize {
        self.pmf.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    /// 1-based class index.
    pub class: usize,
    pub coverage: f64,
    pub gamma: f64,
    pub tsp: f64,
    pub mean_queue: f64,
    pub availability: f64,
    pub waiting: WaitingPmf,
    pub mean_wait: f64,
    pub mean_service: f64,
    pub interarrival: f64,
    pub paoi: f64,
    pub overflow: bool,
}

impl ClassMetrics {
    /// Mean time from generation to successful reception.
    pub fn mean_delay(&self) -> f64 {
        self.mean_wait + self.mean_service
    }
}

/// `sum_n n x_{i,n} 1`.
pub fn mean_queue_length(steady: &SteadyState) -> f64 {
    steady
        .level_pmf()
        .iter()
        .enumerate()
        .map(|(n, p)| n as f64 * p)
        .sum()
}

/// `1 - sum_{j<i} P{queue j non-empty}` for the 0-based class `i`, floored at 0.
///
/// The sum over-counts overlapping busy events, so with several loaded
/// higher classes the raw expression can go negative.
pub fn availability(solution: &NetworkSolution, i: usize) -> f64 {
    let busy: f64 = solution.classes[..i]
        .iter()
        .map(|c| 1.0 - c.steady.level_pmf()[0])
        .sum();
    (1.0 - busy).max(0.0)
}

/// Waiting-time PMF by propagating the arrival-seen queue contents through
/// the service law one slot at a time.
///
/// With `n_max = None` the support grows until the tail drops below
/// [`WAIT_TAIL_TOL`] or reaches [`WAIT_MAX_SLOTS`].
pub fn waiting_time_pmf(steady: &SteadyState, blocks: &QbdBlocks, n_max: Option<usize>) -> WaitingPmf {
    let m = steady.phases;
    let k = steady.levels() - 1;
    let limit = n_max.unwrap_or(WAIT_MAX_SLOTS).clamp(1, WAIT_MAX_SLOTS);
    let s_mat = &blocks.service.transient;
    let s_vec = &blocks.service.absorb;
    let restart = s_vec * blocks.beta.transpose();

    let mut pmf = vec![steady.level_pmf()[0]];
    if k == 0 {
        return WaitingPmf { pmf, tail: 0.0 };
    }
    // Row l-1 holds the phase mass of arrivals that still wait for l departures.
    let mut pending = DMatrix::zeros(k, m);
    for l in 1..=k {
        pending.row_mut(l - 1).copy_from(&steady.level(l).transpose());
    }
    let mut tail: f64 = pending.sum();
    while pmf.len() <= limit {
        if n_max.is_none() && tail < WAIT_TAIL_TOL {
            break;
        }
        pmf.push((pending.row(0) * s_vec)[0]);
        let mut next = &pending * s_mat;
        if k > 1 {
            let shifted = pending.rows(1, k - 1) * &restart;
            let mut top = next.rows_mut(0, k - 1);
            top += shifted;
        }
        pending = next;
        tail = pending.sum().max(0.0);
    }
    WaitingPmf { pmf, tail }
}

/// `sum_n n P{W = n}` over the truncated support.
pub fn mean_wait(waiting: &WaitingPmf) -> f64 {
    waiting
        .pmf
        .iter()
        .enumerate()
        .map(|(n, p)| n as f64 * p)
        .sum()
}

/// Untruncated `E[W]`: an arrival that finds `l` packets and phase vector `y`
/// waits `y (I - S)^{-1} 1 + (l - 1) E[D]` slots on average.
pub fn mean_wait_exact(steady: &SteadyState, blocks: &QbdBlocks) -> Result<f64> {
    let m = steady.phases;
    let ph = &blocks.service;
    let ones = DVector::from_element(m, 1.0);
    let first = linalg::solve_absorbing(&ph.transient, &ph.absorb, &ones)?;
    let service = mean_service(ph)?;
    Ok((1..steady.levels())
        .map(|l| {
            let y = steady.level(l);
            y.dot(&first) + (l as f64 - 1.0) * service * y.sum()
        })
        .sum())
}

/// `beta (I - S)^{-1} 1`.
pub fn mean_service(service: &PhDistribution) -> Result<f64> {
    service.mean_absorption_time()
}

/// `1/alpha + E[W] + E[D]`; infinite without arrivals.
pub fn paoi(alpha: f64, mean_wait: f64, mean_service: f64) -> f64 {
    if alpha <= 0.0 {
        return f64::INFINITY;
    }
    1.0 / alpha + mean_wait + mean_service
}

/// Metrics of the 0-based class `i`; `wait_support` is passed on to
/// [`waiting_time_pmf`]. The mean wait never depends on the truncation.
pub fn class_metrics(
    solution: &NetworkSolution,
    i: usize,
    wait_support: Option<usize>,
) -> Result<ClassMetrics> {
    let class = &solution.classes[i];
    let steady = &class.steady;
    let waiting = waiting_time_pmf(steady, &class.blocks, wait_support);
    let mean_wait = mean_wait_exact(steady, &class.blocks)?;
    let mean_service = mean_service(&class.blocks.service)?;
    let alpha = class.blocks.alpha;
    let coverage = solution.coverage[i];
    Ok(ClassMetrics {
        class: i + 1,
        coverage,
        gamma: steady.gamma,
        tsp: steady.gamma * coverage,
        mean_queue: mean_queue_length(steady),
        availability: availability(solution, i),
        waiting,
        mean_wait,
        mean_service,
        interarrival: if alpha > 0.0 { 1.0 / alpha } else { f64::INFINITY },
        paoi: paoi(alpha, mean_wait, mean_service),
        overflow: class.overflow.overflow,
    })
}

pub fn network_metrics(
    solution: &NetworkSolution,
    wait_support: Option<usize>,
) -> Result<Vec<ClassMetrics>> {
    (0..solution.num_classes())
        .map(|i| class_metrics(solution, i, wait_support))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priority_chain::{build_class_chains, TrafficClass};
    use crate::steady_state::{solve_class, solve_direct};
    use crate::SolveMethod;
    use approx::assert_abs_diff_eq;

    fn class_one(alpha: f64, p: f64, k: usize) -> (QbdBlocks, SteadyState) {
        let blocks = build_class_chains(&[TrafficClass::new(1, alpha, k)], &[p])
            .unwrap()
            .remove(0);
        let steady = solve_class(&blocks, SolveMethod::Direct).unwrap();
        (blocks, steady)
    }

    #[test]
    fn queue_length_of_point_masses() {
        let idle = SteadyState::new(DVector::from_vec(vec![1.0, 0.0, 0.0]), 1, false);
        assert_eq!(mean_queue_length(&idle), 0.0);
        let uniform = SteadyState::new(DVector::from_element(5, 0.2), 1, false);
        assert_abs_diff_eq!(mean_queue_length(&uniform), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn geometric_service_mean() {
        let (blocks, _) = class_one(0.1, 0.5, 4);
        assert_abs_diff_eq!(mean_service(&blocks.service).unwrap(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn paoi_examples() {
        assert_eq!(paoi(0.5, 0.0, 2.0), 4.0);
        assert_eq!(paoi(1.0, 0.0, 1.0), 2.0);
        assert!(paoi(0.0, 0.0, 1.0).is_infinite());
    }

    #[test]
    fn mean_wait_examples() {
        let point = WaitingPmf { pmf: vec![1.0], tail: 0.0 };
        assert_eq!(mean_wait(&point), 0.0);
        let two = WaitingPmf { pmf: vec![0.5, 0.0, 0.5], tail: 0.0 };
        assert_eq!(mean_wait(&two), 1.0);
    }

    #[test]
    fn single_class_wait_is_negative_binomial() {
        // One queued packet ahead: geometric(p) wait.
        let p = 0.5;
        let x = DVector::from_vec(vec![0.3, 0.7]);
        let (blocks, _) = class_one(0.2, p, 1);
        let steady = SteadyState::new(x, 1, false);
        let w = waiting_time_pmf(&steady, &blocks, Some(30));
        assert_abs_diff_eq!(w.pmf[0], 0.3, epsilon = 1e-15);
        for n in 1..30 {
            assert_abs_diff_eq!(w.pmf[n], 0.7 * (1.0 - p).powi(n as i32 - 1) * p, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(w.pmf.iter().sum::<f64>() + w.tail, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn pmf_mean_matches_exact_mean() {
        let classes = [TrafficClass::new(1, 0.2, 3), TrafficClass::new(2, 0.3, 4)];
        let chains = build_class_chains(&classes, &[0.7, 0.6]).unwrap();
        for blocks in &chains {
            let x = solve_direct(&blocks.transition_matrix()).unwrap();
            let steady = SteadyState::new(x, blocks.phases(), false);
            let w = waiting_time_pmf(&steady, blocks, None);
            assert!(w.tail < WAIT_TAIL_TOL);
            assert_abs_diff_eq!(w.pmf.iter().sum::<f64>() + w.tail, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(
                mean_wait(&w),
                mean_wait_exact(&steady, blocks).unwrap(),
                epsilon = 1e-6
            );
        }
    }
}
