//! Stationary laws of the per-class QBD chains.
//!
//! Two independent routes are provided: a dense solve of the assembled
//! transition matrix and a matrix-analytic reduction over the levels. For the
//! finite chain the reduction uses level-dependent rate matrices, starting from
//! the full-buffer boundary `R_k = A0 (I - B2)^{-1}`; deep inside the buffer
//! these approach the homogeneous `R` of [`rate_matrix`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::priority_chain::QbdBlocks;

const STOCHASTIC_INPUT_TOL: f64 = 1e-10;
const RATE_TOL: f64 = 1e-13;
const RATE_MAX_ITER: usize = 100_000;

/// Stationary vector of one class, partitioned by level.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub x: DVector<f64>,
    pub phases: usize,
    /// Probability all higher classes are empty.
    pub gamma: f64,
    /// Probability all higher classes are empty and this one is not.
    pub zeta: f64,
    /// Probability this class and all higher ones are empty.
    pub delta_component: f64,
    pub overflow: bool,
}

impl SteadyState {
    pub fn new(x: DVector<f64>, phases: usize, overflow: bool) -> Self {
        debug_assert_eq!(x.len() % phases, 0);
        let levels = x.len() / phases;
        let serving: Vec<f64> = (0..levels).map(|j| x[j * phases]).collect();
        let delta_component = serving[0];
        let zeta: f64 = serving[1..].iter().sum();
        SteadyState {
            x,
            phases,
            gamma: delta_component + zeta,
            zeta,
            delta_component,
            overflow,
        }
    }

    pub fn levels(&self) -> usize {
        self.x.len() / self.phases
    }

    /// Sub-vector `x_{i,j}` of level `j`.
    pub fn level(&self, j: usize) -> DVector<f64> {
        self.x.rows(j * self.phases, self.phases).into_owned()
    }

    /// Scalar level PMF `x_{i,j} 1`.
    pub fn level_pmf(&self) -> Vec<f64> {
        self.x
            .as_slice()
            .chunks(self.phases)
            .map(|c| c.iter().sum())
            .collect()
    }
}

/// Solves `x P = x`, `x 1 = 1` through `x = 1 (P - I + 1 1^T)^{-1}`.
pub fn solve_direct(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = p.nrows();
    if n == 0 || p.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "transition matrix is {}x{}",
            n,
            p.ncols()
        )));
    }
    for (r, row) in p.row_iter().enumerate() {
        if (row.sum() - 1.0).abs() > STOCHASTIC_INPUT_TOL {
            return Err(Error::NotStochastic(format!(
                "row {r} sums to {}",
                row.sum()
            )));
        }
    }
    let m = p - DMatrix::identity(n, n) + DMatrix::from_element(n, n, 1.0);
    linalg::solve_left(&m, &DVector::from_element(n, 1.0))
}

/// Matrix-analytic stationary vector of a finite QBD.
pub fn solve_mam(blocks: &QbdBlocks) -> Result<DVector<f64>> {
    let m = blocks.phases();
    let k = blocks.max_level;
    let eye = DMatrix::<f64>::identity(m, m);
    let up = |level: usize| if level == 1 { &blocks.c } else { &blocks.a0 };

    // rates[j] maps x_{j-1} to x_j; index 0 unused.
    let mut rates: Vec<DMatrix<f64>> = vec![DMatrix::zeros(0, 0); k + 1];
    rates[k] = linalg::right_divide(up(k), &(&eye - &blocks.b2))?;
    for j in (1..k).rev() {
        let denom = &eye - &blocks.a1 - &rates[j + 1] * &blocks.a2;
        rates[j] = linalg::right_divide(up(j), &denom)?;
    }

    // Mass carried by levels >= j per unit of x_{j-1}: w_j = 1 + R_j w_{j+1}.
    let mut weight = DVector::from_element(m, 1.0);
    for j in (1..=k).rev() {
        weight = DVector::from_element(m, 1.0) + &rates[j] * weight;
    }

    let mut censored = &blocks.b1 + &rates[1] * &blocks.a2 - &eye;
    censored.set_column(0, &weight);
    let mut rhs = DVector::zeros(m);
    rhs[0] = 1.0;
    let x0 = linalg::solve_left(&censored, &rhs)?;

    let mut x = DVector::zeros(m * (k + 1));
    x.rows_mut(0, m).copy_from(&x0);
    let mut level = x0;
    for (j, rate) in rates.iter().enumerate().skip(1) {
        level = linalg::row_times(&level, rate);
        x.rows_mut(j * m, m).copy_from(&level);
    }
    Ok(x)
}

/// Homogeneous rate matrix: minimal non-negative solution of
/// `R = A0 + R A1 + R^2 A2`, by successive substitution.
pub fn rate_matrix(blocks: &QbdBlocks) -> Result<DMatrix<f64>> {
    let m = blocks.phases();
    let mut r = DMatrix::zeros(m, m);
    let mut residual = f64::INFINITY;
    for _ in 0..RATE_MAX_ITER {
        let next = &blocks.a0 + &r * &blocks.a1 + &r * &r * &blocks.a2;
        residual = (&next - &r).amax();
        r = next;
        if residual < RATE_TOL {
            return Ok(r);
        }
    }
    Err(Error::RateMatrixDiverged {
        iterations: RATE_MAX_ITER,
        residual,
    })
}

/// Closed form `R = A0 (I - A1 - A0 1 beta)^{-1}`, valid because `A2` has rank one
/// and, in the non-overflow regime, every level-down passage ends in the
/// serving phase.
pub fn rate_matrix_rank_one(blocks: &QbdBlocks) -> Result<DMatrix<f64>> {
    let m = blocks.phases();
    let ones = DVector::from_element(m, 1.0);
    let denom = DMatrix::identity(m, m) - &blocks.a1 - &blocks.a0 * ones * blocks.beta.transpose();
    linalg::right_divide(&blocks.a0, &denom)
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Drift test of the level process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverflowCheck {
    pub overflow: bool,
    /// `pi A2 1`.
    pub drift_down: f64,
    /// `pi A0 1`.
    pub drift_up: f64,
}

/// Compares the mean downward and upward drift under the stationary phase law
/// `pi` of `A = A0 + A1 + A2`. Overflow when the drift down does not dominate.
pub fn check_overflow(blocks: &QbdBlocks) -> OverflowCheck {
    let m = blocks.phases();
    let a = &blocks.a0 + &blocks.a1 + &blocks.a2;
    let ones = DVector::from_element(m, 1.0);
    let pi = solve_direct(&a).unwrap_or_else(|_| {
        // Reducible phase process: fall back to the Cesaro average from the serving phase.
        let mut acc = DVector::zeros(m);
        let mut v = blocks.beta.clone();
        for _ in 0..10_000 {
            v = linalg::row_times(&v, &a);
            acc += &v;
        }
        acc / 10_000.0
    });
    let drift_down = pi.dot(&(&blocks.a2 * &ones));
    let drift_up = pi.dot(&(&blocks.a0 * &ones));
    OverflowCheck {
        overflow: drift_down <= drift_up,
        drift_down,
        drift_up,
    }
}

/// Scalar summaries of one solved class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMarginals {
    pub level_pmf: Vec<f64>,
    pub gamma: f64,
    pub zeta: f64,
    pub delta_component: f64,
}

pub fn class_marginals(steady: &SteadyState) -> ClassMarginals {
    ClassMarginals {
        level_pmf: steady.level_pmf(),
        gamma: steady.gamma,
        zeta: steady.zeta,
        delta_component: steady.delta_component,
    }
}

/// Solves one class with the requested method, falling back to the dense
/// solve when the matrix-analytic reduction hits a singular level.
pub fn solve_class(
    blocks: &QbdBlocks,
    method: crate::config::SolveMethod,
) -> Result<SteadyState> {
    use crate::config::SolveMethod;
    let overflow = check_overflow(blocks).overflow;
    let x = match method {
        SolveMethod::Direct => solve_direct(&blocks.transition_matrix())?,
        SolveMethod::Mam => match solve_mam(blocks) {
            Ok(x) => x,
            Err(e) => {
                log::debug!("matrix-analytic solve failed ({e}); using the dense solve");
                solve_direct(&blocks.transition_matrix())?
            }
        },
    };
    let x = x.map(|v| if v < 0.0 && v > -1e-14 { 0.0 } else { v });
    Ok(SteadyState::new(x, blocks.phases(), overflow))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priority_chain::{build_class_chains, TrafficClass};
    use approx::assert_abs_diff_eq;

    fn single(alpha: f64, p: f64, k: usize) -> QbdBlocks {
        build_class_chains(&[TrafficClass::new(1, alpha, k)], &[p])
            .unwrap()
            .remove(0)
    }

    #[test]
    fn symmetric_two_state_chain() {
        let p = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        let x = solve_direct(&p).unwrap();
        assert_abs_diff_eq!(x[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn direct_rejects_substochastic_input() {
        let p = DMatrix::from_row_slice(2, 2, &[0.5, 0.4, 0.5, 0.5]);
        assert!(matches!(solve_direct(&p), Err(Error::NotStochastic(_))));
    }

    #[test]
    fn reducible_chain_is_singular() {
        let p = DMatrix::identity(3, 3);
        assert!(matches!(solve_direct(&p), Err(Error::Singular(_))));
    }

    #[test]
    fn mam_matches_direct_single_class() {
        let b = single(0.1, 0.5, 6);
        let direct = solve_direct(&b.transition_matrix()).unwrap();
        let mam = solve_mam(&b).unwrap();
        assert_abs_diff_eq!(direct, mam, epsilon = 1e-12);
    }

    #[test]
    fn single_class_level_ratio_is_constant() {
        let b = single(0.2, 0.6, 5);
        let x = solve_mam(&b).unwrap();
        let ratio = x[2] / x[1];
        for j in 2..5 {
            assert_abs_diff_eq!(x[j + 1] / x[j], ratio, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(ratio, 0.2 * 0.4 / (0.8 * 0.6), epsilon = 1e-12);
    }

    #[test]
    fn overflow_scalar_drifts() {
        let check = check_overflow(&single(0.1, 0.5, 4));
        assert_abs_diff_eq!(check.drift_down, 0.45, epsilon = 1e-15);
        assert_abs_diff_eq!(check.drift_up, 0.05, epsilon = 1e-15);
        assert!(!check.overflow);
    }

    #[test]
    fn no_departures_always_overflow() {
        assert!(check_overflow(&single(0.3, 0.0, 4)).overflow);
    }

    #[test]
    fn no_arrivals_never_overflow() {
        let check = check_overflow(&single(0.0, 0.2, 4));
        assert_eq!(check.drift_up, 0.0);
        assert!(!check.overflow);
    }

    #[test]
    fn rate_matrix_routes_agree_below_overflow() {
        let cls = [
            TrafficClass::new(1, 0.1, 3),
            TrafficClass::new(2, 0.2, 3),
        ];
        let chains = build_class_chains(&cls, &[0.8, 0.7]).unwrap();
        for b in &chains {
            assert!(!check_overflow(b).overflow);
            let iterative = rate_matrix(b).unwrap();
            let closed = rate_matrix_rank_one(b).unwrap();
            assert_abs_diff_eq!(iterative, closed, epsilon = 1e-10);
            assert!(spectral_radius(&iterative) < 1.0);
        }
    }

    #[test]
    fn class_one_gamma_is_one() {
        let b = single(0.3, 0.4, 5);
        let s = solve_class(&b, crate::config::SolveMethod::Mam).unwrap();
        assert_abs_diff_eq!(s.gamma, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.zeta + s.delta_component, s.gamma, epsilon = 1e-15);
    }
}
