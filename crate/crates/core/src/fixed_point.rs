//! Fixed point between per-class steady states and coverage probabilities.
//!
//! Each sweep computes coverage from the current activity (`1 - delta` for
//! the shared pool, `zeta_i` for dedicated pools), rebuilds the class chains
//! in priority order and re-solves them. Iteration stops once no stationary
//! vector moves by more than `epsilon` in max-norm.

use crate::config::{Strategy, SystemConfig};
use crate::coverage::{class_kappas, coverage_probability, LoadParams, RadioParams};
use crate::error::{Error, Result};
use crate::priority_chain::{build_class_chains, QbdBlocks};
use crate::steady_state::{check_overflow, solve_class, OverflowCheck, SteadyState};

/// Consecutive residual increases tolerated before damping kicks in.
const NON_MONOTONE_LIMIT: usize = 50;
const AUTO_DAMPING: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct ClassSolution {
    pub blocks: QbdBlocks,
    pub steady: SteadyState,
    pub overflow: OverflowCheck,
}

#[derive(Debug, Clone)]
pub struct NetworkSolution {
    /// Coverage probability each class's chain was built with.
    pub coverage: Vec<f64>,
    pub classes: Vec<ClassSolution>,
    pub iterations: usize,
    pub converged: bool,
    /// Max-norm change of the stationary vectors in the last sweep.
    pub residual: f64,
    /// Set when the strict overflow break ended the iteration.
    pub stopped_on_overflow: bool,
    /// Probability that every queue is empty (0 after a strict overflow break).
    pub delta: f64,
}

impl NetworkSolution {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.classes.iter().map(|c| c.steady.gamma).collect()
    }

    pub fn zetas(&self) -> Vec<f64> {
        self.classes.iter().map(|c| c.steady.zeta).collect()
    }

    /// `gamma_i p_i` per class.
    pub fn tsp(&self) -> Vec<f64> {
        self.classes
            .iter()
            .zip(&self.coverage)
            .map(|(c, p)| c.steady.gamma * p)
            .collect()
    }

    pub fn overflow_flags(&self) -> Vec<bool> {
        self.classes.iter().map(|c| c.overflow.overflow).collect()
    }

    pub fn any_overflow(&self) -> bool {
        self.classes.iter().any(|c| c.overflow.overflow)
    }
}

/// Coverage of every class given the current activity estimates.
pub fn class_coverage(cfg: &SystemConfig, delta: f64, zeta: &[f64]) -> Result<Vec<f64>> {
    let radio = RadioParams::from_config(cfg);
    let kappas = class_kappas(cfg)?;
    match cfg.strategy {
        Strategy::Shared => {
            let load = LoadParams {
                kappa: kappas[0],
                activity: (1.0 - delta).clamp(0.0, 1.0),
            };
            Ok(vec![coverage_probability(&radio, &load)?; kappas.len()])
        }
        Strategy::DedicatedEa | Strategy::DedicatedWa => kappas
            .iter()
            .zip(zeta)
            .map(|(&kappa, &z)| {
                coverage_probability(
                    &radio,
                    &LoadParams {
                        kappa,
                        activity: z.clamp(0.0, 1.0),
                    },
                )
            })
            .collect(),
        Strategy::PriorityAgnostic => Err(Error::UnsupportedStrategy(
            "the priority-agnostic benchmark has no analytical model; simulate it instead".into(),
        )),
    }
}

/// Builds and solves every class chain for a fixed coverage vector.
pub fn solve_classes(cfg: &SystemConfig, coverage: &[f64]) -> Result<Vec<ClassSolution>> {
    let chains = build_class_chains(&cfg.classes(), coverage)?;
    chains
        .into_iter()
        .map(|blocks| {
            let steady = solve_class(&blocks, cfg.solve_method)?;
            let overflow = check_overflow(&blocks);
            Ok(ClassSolution {
                blocks,
                steady,
                overflow,
            })
        })
        .collect()
}

/// Runs the fixed point from an idle network (`delta = 1`, `zeta = 0`).
pub fn solve_network(cfg: &SystemConfig) -> Result<NetworkSolution> {
    solve_network_with_init(cfg, 1.0, &vec![0.0; cfg.num_classes()])
}

pub fn solve_network_with_init(
    cfg: &SystemConfig,
    init_delta: f64,
    init_zeta: &[f64],
) -> Result<NetworkSolution> {
    cfg.validate()?;
    if init_zeta.len() != cfg.num_classes() {
        return Err(Error::DimensionMismatch(format!(
            "{} initial zeta values for {} classes",
            init_zeta.len(),
            cfg.num_classes()
        )));
    }
    let mut delta = init_delta;
    let mut zeta = init_zeta.to_vec();
    let mut omega = cfg.damping;
    let mut previous_p: Option<Vec<f64>> = None;
    let mut previous_x: Option<Vec<nalgebra::DVector<f64>>> = None;
    let mut residual = f64::INFINITY;
    let mut non_monotone = 0;
    let mut best: Option<NetworkSolution> = None;

    for iteration in 1..=cfg.max_iterations {
        let target = class_coverage(cfg, delta, &zeta)?;
        let coverage: Vec<f64> = match &previous_p {
            Some(prev) => prev
                .iter()
                .zip(&target)
                .map(|(old, new)| (omega * new + (1.0 - omega) * old).clamp(0.0, 1.0))
                .collect(),
            None => target,
        };
        let classes = solve_classes(cfg, &coverage)?;

        let new_residual = match &previous_x {
            Some(prev) => prev
                .iter()
                .zip(&classes)
                .map(|(old, c)| (old - &c.steady.x).amax())
                .fold(0.0, f64::max),
            None => f64::INFINITY,
        };
        if new_residual > residual && residual.is_finite() {
            non_monotone += 1;
            if non_monotone >= NON_MONOTONE_LIMIT && omega > AUTO_DAMPING {
                log::info!("fixed point oscillating; damping coverage updates by {AUTO_DAMPING}");
                omega = AUTO_DAMPING;
            }
        }
        residual = new_residual;

        zeta = classes.iter().map(|c| c.steady.zeta).collect();
        delta = classes.last().map_or(1.0, |c| c.steady.delta_component);
        previous_x = Some(classes.iter().map(|c| c.steady.x.clone()).collect());
        previous_p = Some(coverage.clone());

        let overflow_break = cfg.strict_overflow_break && classes.iter().any(|c| c.overflow.overflow);
        let converged = residual < cfg.epsilon;
        let solution = NetworkSolution {
            coverage,
            classes,
            iterations: iteration,
            converged,
            residual,
            stopped_on_overflow: overflow_break,
            delta: if overflow_break { 0.0 } else { delta },
        };
        if converged || overflow_break {
            return Ok(solution);
        }
        let keep = best.as_ref().is_none_or(|b| solution.residual <= b.residual);
        if keep {
            best = Some(solution);
        }
    }
    let best = best.expect("max_iterations is validated to be non-zero");
    log::warn!(
        "fixed point did not converge in {} iterations (best residual {:.3e})",
        cfg.max_iterations,
        best.residual
    );
    Ok(best)
}
