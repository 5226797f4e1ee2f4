//! Vacation-based Geo/PH/1 chains for preemptive priority classes.
//!
//! Class `i` sees the classes above it only through a server vacation: while
//! any higher-priority queue is non-empty the server is away, and the length
//! of that absence is a discrete phase-type law whose transient part is the
//! full transition matrix of class `i - 1` with the all-empty state removed.
//! The chains are therefore built recursively from class 1 downward.
//!
//! Phase layout: a phase of class `i` is a joint occupancy `(n_1, .., n_{i-1})`
//! of the higher classes, encoded as a mixed-radix number with `n_1` varying
//! fastest. Phase 0 is the all-empty (serving) phase. A state of class `i` is
//! `level * m_i + phase` with the level `n_i` varying slowest, which makes it
//! the same mixed-radix encoding over `(n_1, .., n_i)`. Removing state 0 of
//! class `i - 1` therefore yields exactly the vacation phases of class `i`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Row-sum tolerance used for every constructed stochastic object.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Default cap on the joint oracle state count.
pub const DEFAULT_ORACLE_CAP: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficClass {
    /// 1-based priority index; 1 is the highest priority.
    pub index: usize,
    /// Per-slot Bernoulli arrival probability.
    pub alpha: f64,
    /// Buffer size `k_i`.
    pub queue_size: usize,
}

impl TrafficClass {
    pub fn new(index: usize, alpha: f64, queue_size: usize) -> Self {
        TrafficClass {
            index,
            alpha,
            queue_size,
        }
    }

    /// Number of occupancy levels, `k_i + 1`.
    pub fn levels(&self) -> usize {
        self.queue_size + 1
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!(
                "class {} arrival probability {} outside [0, 1]",
                self.index, self.alpha
            )));
        }
        if self.queue_size == 0 {
            return Err(Error::InvalidConfig(format!(
                "class {} has a zero-size queue",
                self.index
            )));
        }
        Ok(())
    }
}

/// Mixed-radix encoding of joint occupancies, first class varying fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointIndex {
    radices: Vec<usize>,
}

impl JointIndex {
    pub fn new(classes: &[TrafficClass]) -> Self {
        JointIndex {
            radices: classes.iter().map(TrafficClass::levels).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.radices.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.radices.is_empty()
    }

    pub fn encode(&self, occupancy: &[usize]) -> usize {
        debug_assert_eq!(occupancy.len(), self.radices.len());
        occupancy
            .iter()
            .zip(&self.radices)
            .rev()
            .fold(0, |acc, (&n, &r)| acc * r + n)
    }

    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        self.radices
            .iter()
            .map(|&r| {
                let n = index % r;
                index /= r;
                n
            })
            .collect()
    }
}

/// Discrete phase-type law `(init, transient, absorb)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhDistribution {
    pub init: DVector<f64>,
    pub transient: DMatrix<f64>,
    pub absorb: DVector<f64>,
}

impl PhDistribution {
    /// The zero-phase law used for the vacation of class 1.
    pub fn empty() -> Self {
        PhDistribution {
            init: DVector::zeros(0),
            transient: DMatrix::zeros(0, 0),
            absorb: DVector::zeros(0),
        }
    }

    /// Builds the law from its transient part; the absorption vector is `1 - T 1`.
    pub fn from_transient(init: DVector<f64>, transient: DMatrix<f64>) -> Result<Self> {
        if transient.nrows() != transient.ncols() || init.len() != transient.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "init of length {} with a {}x{} transient matrix",
                init.len(),
                transient.nrows(),
                transient.ncols()
            )));
        }
        let absorb = DVector::from_iterator(
            transient.nrows(),
            transient.row_iter().map(|row| clamp_unit(1.0 - row.sum())),
        );
        let ph = PhDistribution {
            init,
            transient,
            absorb,
        };
        ph.validate()?;
        Ok(ph)
    }

    pub fn dim(&self) -> usize {
        self.init.len()
    }

    /// Entries in `[0, 1]`, rows of `[T | t]` summing to one, and an init
    /// vector that is a distribution (or identically zero when the phase
    /// process can never be entered).
    pub fn validate(&self) -> Result<()> {
        let tol = STOCHASTIC_TOL;
        let in_unit = |v: f64| (-tol..=1.0 + tol).contains(&v);
        if !self.transient.iter().all(|&v| in_unit(v)) || !self.absorb.iter().all(|&v| in_unit(v))
        {
            return Err(Error::NotStochastic("phase-type entry outside [0, 1]".into()));
        }
        for (r, row) in self.transient.row_iter().enumerate() {
            let total = row.sum() + self.absorb[r];
            if (total - 1.0).abs() > tol {
                return Err(Error::NotStochastic(format!(
                    "phase-type row {r} sums to {total}"
                )));
            }
        }
        let mass = self.init.sum();
        if self.dim() > 0 && (mass - 1.0).abs() > tol && mass.abs() > tol {
            return Err(Error::NotStochastic(format!("init vector sums to {mass}")));
        }
        Ok(())
    }

    /// Mean number of slots to absorption, `init (I - T)^{-1} 1`.
    pub fn mean_absorption_time(&self) -> Result<f64> {
        let ones = DVector::from_element(self.dim(), 1.0);
        let times = linalg::solve_absorbing(&self.transient, &self.absorb, &ones)?;
        Ok(self.init.dot(&times))
    }
}

fn clamp_unit(v: f64) -> f64 {
    if v.abs() < 1e-15 {
        0.0
    } else {
        v
    }
}

/// Probability of a higher-priority batch arrival and the distribution of the
/// joint state the vacation starts in.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchArrival {
    /// `1 - prod(1 - alpha_m)` over the higher classes.
    pub chi: f64,
    /// Distribution over the `m_i - 1` non-empty joint states.
    pub v: DVector<f64>,
}

/// A vacation starts from an empty higher-priority system, so exactly one
/// packet per arriving class is present: the start state has occupancies in
/// `{0, 1}` with at least one 1, weighted by the batch probability.
pub fn batch_arrival_distribution(higher: &[TrafficClass]) -> BatchArrival {
    if higher.is_empty() {
        return BatchArrival {
            chi: 0.0,
            v: DVector::zeros(0),
        };
    }
    let index = JointIndex::new(higher);
    let chi = 1.0 - higher.iter().map(|c| 1.0 - c.alpha).product::<f64>();
    let mut v = DVector::zeros(index.len() - 1);
    if chi > 0.0 {
        // Enumerate every non-empty subset of arriving classes.
        for mask in 1usize..(1 << higher.len()) {
            let occupancy: Vec<usize> = (0..higher.len()).map(|j| (mask >> j) & 1).collect();
            let prob: f64 = higher
                .iter()
                .zip(&occupancy)
                .map(|(c, &n)| if n == 1 { c.alpha } else { 1.0 - c.alpha })
                .product();
            v[index.encode(&occupancy) - 1] = prob / chi;
        }
    }
    BatchArrival { chi, v }
}

/// Busy-period law of class 1 over occupancies `1..=k_1`: a birth-death walk
/// that is absorbed when the last packet leaves without a new arrival.
pub fn busy_period_ph(class1: &TrafficClass, p1: f64) -> Result<PhDistribution> {
    let k = class1.queue_size;
    let a = class1.alpha;
    let (ab, pb) = (1.0 - a, 1.0 - p1);
    let mut v = DMatrix::zeros(k, k);
    for n in 0..k {
        if n > 0 {
            v[(n, n - 1)] = ab * p1;
        }
        if n + 1 < k {
            v[(n, n + 1)] = a * pb;
            v[(n, n)] = ab * pb + a * p1;
        } else {
            v[(n, n)] = ab * pb + a;
        }
    }
    let mut init = DVector::zeros(k);
    init[0] = 1.0;
    PhDistribution::from_transient(init, v)
}

/// Vacation law seen by the class below: the transition matrix of the class
/// above with its all-empty state deleted. The init vector is left at zero;
/// the caller attaches the batch-arrival distribution.
pub fn vacation_from_transition(transition: &DMatrix<f64>) -> Result<PhDistribution> {
    let n = transition.nrows();
    if n < 2 || transition.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "vacation needs a square transition matrix with at least two states, got {}x{}",
            n,
            transition.ncols()
        )));
    }
    let v = transition.view((1, 1), (n - 1, n - 1)).into_owned();
    PhDistribution::from_transient(DVector::zeros(n - 1), v)
}

/// Builds the vacation law of class `higher.len() + 1` from scratch.
///
/// `coverage` holds the success probabilities of the higher classes.
pub fn build_vacation_ph(higher: &[TrafficClass], coverage: &[f64]) -> Result<PhDistribution> {
    if higher.len() != coverage.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} higher classes but {} coverage probabilities",
            higher.len(),
            coverage.len()
        )));
    }
    check_probabilities(coverage)?;
    for c in higher {
        c.validate()?;
    }
    match higher.len() {
        0 => Ok(PhDistribution::empty()),
        1 => {
            let mut ph = busy_period_ph(&higher[0], coverage[0])?;
            ph.init = batch_arrival_distribution(higher).v;
            Ok(ph)
        }
        n => {
            let chains = build_class_chains(&higher[..n], &coverage[..n])?;
            let mut ph = vacation_from_transition(&chains[n - 1].transition_matrix())?;
            ph.init = batch_arrival_distribution(higher).v;
            Ok(ph)
        }
    }
}

/// The six QBD blocks of one class plus the service law that generates them.
#[derive(Debug, Clone, PartialEq)]
pub struct QbdBlocks {
    pub b1: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub a0: DMatrix<f64>,
    pub a1: DMatrix<f64>,
    pub a2: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    /// Service restart vector, 1 at the serving phase.
    pub beta: DVector<f64>,
    /// Phase process at the empty level (`S_0`).
    pub boundary: DMatrix<f64>,
    /// Service law `(beta, S, s)` until one own-class departure.
    pub service: PhDistribution,
    /// Buffer size `k_i`; levels run `0..=max_level`.
    pub max_level: usize,
    pub alpha: f64,
    pub coverage: f64,
}

/// Assembles the QBD blocks of one class from its vacation law.
///
/// The phase process is `[[1 - chi, chi v], [v~, V]]`. Own-class service only
/// happens in phase 0 and only when no higher-priority packet arrives in the
/// slot, so the departure probability from phase 0 is `(1 - chi) p`.
pub fn build_qbd_blocks(
    vacation: &PhDistribution,
    batch: &BatchArrival,
    alpha: f64,
    coverage: f64,
    queue_size: usize,
) -> Result<QbdBlocks> {
    check_probabilities(&[alpha, coverage, batch.chi])?;
    if batch.v.len() != vacation.dim() {
        return Err(Error::DimensionMismatch(format!(
            "vacation has {} phases but the start distribution has {}",
            vacation.dim(),
            batch.v.len()
        )));
    }
    if queue_size == 0 {
        return Err(Error::InvalidConfig("queue size must be at least 1".into()));
    }
    let m = vacation.dim() + 1;
    let chi = batch.chi;
    let mut phase = DMatrix::zeros(m, m);
    phase[(0, 0)] = 1.0 - chi;
    for j in 1..m {
        phase[(0, j)] = chi * batch.v[j - 1];
        phase[(j, 0)] = vacation.absorb[j - 1];
    }
    phase
        .view_mut((1, 1), (m - 1, m - 1))
        .copy_from(&vacation.transient);

    let mut s_mat = phase.clone();
    s_mat[(0, 0)] *= 1.0 - coverage;
    let mut beta = DVector::zeros(m);
    beta[0] = 1.0;
    let service = PhDistribution::from_transient(beta.clone(), s_mat)?;
    let restart = &service.absorb * beta.transpose();

    let ab = 1.0 - alpha;
    let s = &service.transient;
    let blocks = QbdBlocks {
        b1: &phase * ab,
        c: &phase * alpha,
        a0: s * alpha,
        a1: &restart * alpha + s * ab,
        a2: &restart * ab,
        b2: &restart * alpha + s,
        beta,
        boundary: phase,
        service,
        max_level: queue_size,
        alpha,
        coverage,
    };
    blocks.validate()?;
    Ok(blocks)
}

impl QbdBlocks {
    pub fn phases(&self) -> usize {
        self.beta.len()
    }

    pub fn levels(&self) -> usize {
        self.max_level + 1
    }

    /// Row sums of `[B1 | C]`, `[A2 | A1 | A0]` and `[A2 | B2]`.
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, parts: &[&DMatrix<f64>]| -> Result<()> {
            for r in 0..self.phases() {
                let total: f64 = parts.iter().map(|m| m.row(r).sum()).sum();
                if (total - 1.0).abs() > STOCHASTIC_TOL {
                    return Err(Error::NotStochastic(format!(
                        "{name} row {r} sums to {total}"
                    )));
                }
            }
            Ok(())
        };
        check("[B1 | C]", &[&self.b1, &self.c])?;
        check("[A2 | A1 | A0]", &[&self.a2, &self.a1, &self.a0])?;
        check("[A2 | B2]", &[&self.a2, &self.b2])?;
        if self.iter_blocks().any(|b| b.iter().any(|&v| v < -STOCHASTIC_TOL)) {
            return Err(Error::NotStochastic("negative block entry".into()));
        }
        Ok(())
    }

    fn iter_blocks(&self) -> impl Iterator<Item = &DMatrix<f64>> {
        [&self.b1, &self.c, &self.a0, &self.a1, &self.a2, &self.b2].into_iter()
    }

    /// The full block-tridiagonal transition matrix over `(level, phase)`.
    pub fn transition_matrix(&self) -> DMatrix<f64> {
        let m = self.phases();
        let k = self.max_level;
        let mut p = DMatrix::zeros(m * (k + 1), m * (k + 1));
        let mut put = |row: usize, col: usize, block: &DMatrix<f64>| {
            p.view_mut((row * m, col * m), (m, m)).copy_from(block);
        };
        put(0, 0, &self.b1);
        put(0, 1, &self.c);
        for level in 1..=k {
            put(level, level - 1, &self.a2);
            if level == k {
                put(level, level, &self.b2);
            } else {
                put(level, level, &self.a1);
                put(level, level + 1, &self.a0);
            }
        }
        p
    }
}

/// Builds the QBD blocks of every class in priority order, feeding each
/// class's transition matrix into the vacation of the next.
pub fn build_class_chains(classes: &[TrafficClass], coverage: &[f64]) -> Result<Vec<QbdBlocks>> {
    if classes.len() != coverage.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} classes but {} coverage probabilities",
            classes.len(),
            coverage.len()
        )));
    }
    let mut chains: Vec<QbdBlocks> = Vec::with_capacity(classes.len());
    for (i, class) in classes.iter().enumerate() {
        class.validate()?;
        let batch = batch_arrival_distribution(&classes[..i]);
        let vacation = match chains.last() {
            None => PhDistribution::empty(),
            Some(prev) => {
                let mut ph = vacation_from_transition(&prev.transition_matrix())?;
                ph.init = batch.v.clone();
                ph
            }
        };
        chains.push(build_qbd_blocks(
            &vacation,
            &batch,
            class.alpha,
            coverage[i],
            class.queue_size,
        )?);
    }
    Ok(chains)
}

fn check_probabilities(values: &[f64]) -> Result<()> {
    match values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(v) => Err(Error::InvalidConfig(format!("probability {v} outside [0, 1]"))),
        None => Ok(()),
    }
}

/// Exact slot-level chain over the joint occupancy of all classes.
///
/// Per slot: independent Bernoulli arrivals; the highest-priority class that is
/// non-empty after arrivals is selected; if its queue already held a packet at
/// the start of the slot the head packet leaves with that class's coverage
/// probability, otherwise (only fresh arrivals) nothing is transmitted.
/// Departures free space before arrivals are admitted; the rest is dropped.
#[derive(Debug, Clone)]
pub struct JointOracleChain {
    index: JointIndex,
    rows: Vec<Vec<(usize, f64)>>,
}

pub fn build_joint_oracle_chain(
    classes: &[TrafficClass],
    coverage: &[f64],
    cap: usize,
) -> Result<JointOracleChain> {
    if classes.len() != coverage.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} classes but {} coverage probabilities",
            classes.len(),
            coverage.len()
        )));
    }
    check_probabilities(coverage)?;
    for c in classes {
        c.validate()?;
    }
    let index = JointIndex::new(classes);
    let states = index.len();
    if states > cap {
        return Err(Error::StateSpaceTooLarge { states, cap });
    }
    let n = classes.len();
    let mut rows = Vec::with_capacity(states);
    for s in 0..states {
        let occupancy = index.decode(s);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for mask in 0usize..(1 << n) {
            let arrivals: Vec<usize> = (0..n).map(|j| (mask >> j) & 1).collect();
            let prob: f64 = classes
                .iter()
                .zip(&arrivals)
                .map(|(c, &a)| if a == 1 { c.alpha } else { 1.0 - c.alpha })
                .product();
            if prob == 0.0 {
                continue;
            }
            let selected = (0..n).find(|&j| occupancy[j] + arrivals[j] > 0);
            let served = selected.filter(|&j| occupancy[j] > 0);
            let outcomes: &[(usize, f64)] = match served {
                Some(j) => &[(1, coverage[j]), (0, 1.0 - coverage[j])],
                None => &[(0, 1.0)],
            };
            for &(departed, q) in outcomes {
                if q == 0.0 {
                    continue;
                }
                let next: Vec<usize> = (0..n)
                    .map(|j| {
                        let d = usize::from(served == Some(j)) * departed;
                        (occupancy[j] - d + arrivals[j]).min(classes[j].queue_size)
                    })
                    .collect();
                let target = index.encode(&next);
                match row.iter_mut().find(|(t, _)| *t == target) {
                    Some(entry) => entry.1 += prob * q,
                    None => row.push((target, prob * q)),
                }
            }
        }
        row.sort_by_key(|&(t, _)| t);
        rows.push(row);
    }
    Ok(JointOracleChain { index, rows })
}

impl JointOracleChain {
    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn index(&self) -> &JointIndex {
        &self.index
    }

    /// Sparse row `s`: `(target, probability)` pairs.
    pub fn row(&self, s: usize) -> &[(usize, f64)] {
        &self.rows[s]
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.num_states();
        let mut p = DMatrix::zeros(n, n);
        for (s, row) in self.rows.iter().enumerate() {
            for &(t, q) in row {
                p[(s, t)] = q;
            }
        }
        p
    }

    /// Stationary distribution: dense solve for small chains, Gauss-Seidel
    /// sweeps over the sparse rows otherwise.
    pub fn stationary(&self) -> Result<DVector<f64>> {
        let n = self.num_states();
        if n <= 4096 {
            return crate::steady_state::solve_direct(&self.to_dense());
        }
        let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut self_loop = vec![0.0; n];
        for (s, row) in self.rows.iter().enumerate() {
            for &(t, q) in row {
                if t == s {
                    self_loop[s] = q;
                } else {
                    incoming[t].push((s, q));
                }
            }
        }
        let mut x = DVector::from_element(n, 1.0 / n as f64);
        for _ in 0..100_000 {
            let mut change: f64 = 0.0;
            for t in 0..n {
                let inflow: f64 = incoming[t].iter().map(|&(s, q)| x[s] * q).sum();
                let updated = inflow / (1.0 - self_loop[t]);
                change = change.max((updated - x[t]).abs());
                x[t] = updated;
            }
            let total = x.sum();
            x /= total;
            if change < 1e-15 {
                return Ok(x);
            }
        }
        Err(Error::Singular("Gauss-Seidel sweeps on the oracle chain did not settle".into()))
    }

    /// Joint distribution of classes `1..=i` (1-based), in the same state
    /// layout as the class-`i` vacation chain.
    pub fn prefix_distribution(&self, stationary: &DVector<f64>, i: usize) -> DVector<f64> {
        let radices = &self.index.radices[..i];
        let width: usize = radices.iter().product();
        let mut out = DVector::zeros(width);
        for (s, &mass) in stationary.iter().enumerate() {
            out[s % width] += mass;
        }
        out
    }

    /// Level PMF of class `i` (1-based).
    pub fn class_marginal(&self, stationary: &DVector<f64>, i: usize) -> Vec<f64> {
        let mut pmf = vec![0.0; self.index.radices[i - 1]];
        for (s, &mass) in stationary.iter().enumerate() {
            pmf[self.index.decode(s)[i - 1]] += mass;
        }
        pmf
    }
}
