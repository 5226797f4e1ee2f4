//! Thin wrappers over nalgebra's dense LU for the row-vector conventions
//! used by Markov chains.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Pivot-ratio threshold above which a solve is logged as ill-conditioned.
pub const CONDITION_WARN: f64 = 1e12;

/// Solves `a x = b`.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() == 0 {
        return Ok(DVector::zeros(0));
    }
    let lu = a.clone().lu();
    warn_if_ill_conditioned(lu.u().diagonal().iter());
    lu.solve(b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular(format!("{}x{} system", a.nrows(), a.ncols())))
}

/// Solves the row-vector system `x a = b`.
pub fn solve_left(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    solve(&a.transpose(), b)
}

/// Right-multiplies by `a^{-1}`: returns `m a^{-1}`.
pub fn right_divide(m: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let lu = a.transpose().lu();
    warn_if_ill_conditioned(lu.u().diagonal().iter());
    lu.solve(&m.transpose())
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .map(|x| x.transpose())
        .ok_or_else(|| Error::Singular(format!("{}x{} right division", a.nrows(), a.ncols())))
}

/// Solves `(I - t) x = b` for a substochastic `t` whose rows leave with
/// probability `exit = 1 - t 1`.
///
/// Gaussian elimination in the Grassmann-Taksar-Heyman style: pivots are
/// rebuilt from the exit mass and the off-diagonal entries, so with `b >= 0`
/// every update adds terms of one sign. This stays accurate when `I - t` is
/// nearly singular, e.g. absorption times of order `1e16`.
pub fn solve_absorbing(t: &DMatrix<f64>, exit: &DVector<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = t.nrows();
    let mut off = t.clone();
    off.fill_diagonal(0.0);
    let mut exit = exit.clone();
    let mut rhs = b.clone();
    let mut pivot = vec![0.0; n];
    for k in 0..n {
        let d = exit[k] + off.row(k).columns_range(k + 1..).sum();
        if !(d > 0.0) {
            return Err(Error::Singular(format!("no way out of phase {k} of {n}")));
        }
        pivot[k] = d;
        for i in k + 1..n {
            let f = off[(i, k)] / d;
            if f == 0.0 {
                continue;
            }
            off[(i, k)] = 0.0;
            for j in k + 1..n {
                if j != i {
                    off[(i, j)] += f * off[(k, j)];
                }
            }
            exit[i] += f * exit[k];
            rhs[i] += f * rhs[k];
        }
    }
    let mut x = DVector::zeros(n);
    for k in (0..n).rev() {
        let carried: f64 = (k + 1..n).map(|j| off[(k, j)] * x[j]).sum();
        x[k] = (rhs[k] + carried) / pivot[k];
    }
    Ok(x)
}

/// `x a` for a row vector `x`.
pub fn row_times(x: &DVector<f64>, a: &DMatrix<f64>) -> DVector<f64> {
    a.tr_mul(x)
}

fn warn_if_ill_conditioned<'a>(pivots: impl Iterator<Item = &'a f64>) {
    let (lo, hi) = pivots.fold((f64::INFINITY, 0.0f64), |(lo, hi), &p| {
        (lo.min(p.abs()), hi.max(p.abs()))
    });
    if lo > 0.0 && hi / lo > CONDITION_WARN {
        log::warn!("ill-conditioned solve: pivot ratio {:.3e}", hi / lo);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn absorbing_solve_matches_lu() {
        let t = DMatrix::from_row_slice(3, 3, &[0.5, 0.2, 0.1, 0.0, 0.6, 0.3, 0.25, 0.25, 0.25]);
        let exit = DVector::from_iterator(3, t.row_iter().map(|r| 1.0 - r.sum()));
        let b = DVector::from_vec(vec![1.0, 2.0, 0.5]);
        let lu = solve(&(DMatrix::identity(3, 3) - &t), &b).unwrap();
        let gth = solve_absorbing(&t, &exit, &b).unwrap();
        assert_relative_eq!(lu, gth, max_relative = 1e-13);
    }

    #[test]
    fn absorbing_solve_keeps_tiny_exits() {
        // Geometric time to absorption with exit probability 1e-17.
        let eps = 1e-17;
        let t = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5 - eps, 0.5]);
        let exit = DVector::from_vec(vec![0.0, eps]);
        let x = solve_absorbing(&t, &exit, &DVector::from_element(2, 1.0)).unwrap();
        assert_relative_eq!(x[1], 2.0 / eps, max_relative = 1e-12);
        assert!(x[0] >= x[1]);
    }

    #[test]
    fn closed_phase_set_is_singular() {
        let t = DMatrix::identity(2, 2);
        let exit = DVector::zeros(2);
        assert!(solve_absorbing(&t, &exit, &DVector::from_element(2, 1.0)).is_err());
    }
}
