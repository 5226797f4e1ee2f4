use rayon::prelude::*;
use vacqnet_core::fixed_point::{solve_network, NetworkSolution};
use vacqnet_core::metrics::{network_metrics, ClassMetrics};
use vacqnet_core::sim::{run_campaign, run_campaign_with_events, DepartureEvent, SimStats};
use vacqnet_core::{Strategy, SystemConfig};

use crate::run_config::{set_parameter, Mode, RunConfig, SearchSpec, DEFAULT_SEED};
use crate::CliError;

pub const ANALYZE_HEADER: [&str; 12] = [
    "theta_db",
    "strategy",
    "class",
    "p",
    "gamma",
    "tsp",
    "mean_q",
    "availability",
    "mean_wait",
    "mean_service",
    "paoi",
    "overflow",
];

pub const FRONTIER_HEADER: [&str; 4] = ["grid_value", "search_max", "strategy", "bracket"];

pub const SIMULATE_HEADER: [&str; 15] = [
    "theta_db",
    "strategy",
    "class",
    "p",
    "gamma",
    "tsp",
    "tsp_half_width",
    "mean_q",
    "availability",
    "mean_wait",
    "mean_service",
    "mean_delay",
    "paoi",
    "drop_rate",
    "warmup_reached",
];

fn num(v: f64) -> String {
    v.to_string()
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn solve_checked(cfg: &SystemConfig) -> Result<NetworkSolution, CliError> {
    let solution = solve_network(cfg)?;
    if !solution.converged && !solution.stopped_on_overflow {
        return Err(CliError::NotConverged(format!(
            "fixed point at theta {} dB ({}) stopped after {} iterations with residual {:.3e}",
            cfg.theta_db, cfg.strategy, solution.iterations, solution.residual
        )));
    }
    Ok(solution)
}

/// Solves one configuration and returns its per-class metric rows.
fn analyze_rows(cfg: &SystemConfig) -> Result<Vec<Vec<String>>, CliError> {
    let solution = solve_checked(cfg)?;
    // The CSV carries no waiting-time PMF, so keep its support minimal.
    let metrics = network_metrics(&solution, Some(1))?;
    Ok(metrics.iter().map(|m| analyze_record(cfg, m)).collect())
}

fn analyze_record(cfg: &SystemConfig, m: &ClassMetrics) -> Vec<String> {
    vec![
        num(cfg.theta_db),
        cfg.strategy.to_string(),
        m.class.to_string(),
        num(m.coverage),
        num(m.gamma),
        num(m.tsp),
        num(m.mean_queue),
        num(m.availability),
        num(m.mean_wait),
        num(m.mean_service),
        num(m.paoi),
        m.overflow.to_string(),
    ]
}

/// CSV of the analytical metrics for one system configuration.
pub fn analyze_csv(cfg: &SystemConfig) -> Result<String, CliError> {
    cfg.validate()?;
    csv_string(&ANALYZE_HEADER, analyze_rows(cfg)?)
}

pub fn run_analyze(run: &RunConfig) -> Result<String, CliError> {
    run.check_mode(Mode::Analyze)?;
    analyze_csv(&run.system)
}

/// One analyze block per grid point, prefixed by the swept value unless
/// that value is already a column.
pub fn run_sweep(run: &RunConfig) -> Result<String, CliError> {
    run.check_mode(Mode::Sweep)?;
    let axis = run
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep mode needs a `sweep` block".into()))?;
    let values = axis.values()?;
    let configs = values
        .iter()
        .map(|&v| {
            let mut cfg = run.system.clone();
            set_parameter(&mut cfg, &axis.parameter, v)?;
            cfg.validate()?;
            Ok(cfg)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let blocks = configs
        .par_iter()
        .map(analyze_rows)
        .collect::<Result<Vec<_>, CliError>>()?;
    // A parameter that is already a column (theta_db) gets no extra prefix.
    let prefix = !ANALYZE_HEADER.contains(&axis.parameter.as_str());
    let mut header = Vec::new();
    if prefix {
        header.push(axis.parameter.as_str());
    }
    header.extend_from_slice(&ANALYZE_HEADER);
    let rows = values.iter().zip(blocks).flat_map(|(v, block)| {
        block.into_iter().map(move |mut row| {
            if prefix {
                row.insert(0, num(*v));
            }
            row
        })
    });
    csv_string(&header, rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bracket {
    /// The frontier lies inside the search bracket.
    Interior,
    /// Even the lower end overflows; `search_max` is the lower end.
    Empty,
    /// The upper end is still stable; `search_max` is the upper end.
    Open,
}

impl Bracket {
    fn as_str(self) -> &'static str {
        match self {
            Bracket::Interior => "interior",
            Bracket::Empty => "empty",
            Bracket::Open => "open",
        }
    }
}

fn stable(cfg: &SystemConfig) -> Result<bool, CliError> {
    Ok(!solve_checked(cfg)?.any_overflow())
}

/// Largest search value keeping every class out of overflow.
fn bisect(base: &SystemConfig, search: &SearchSpec, steps: usize) -> Result<(f64, Bracket), CliError> {
    let at = |v: f64| -> Result<bool, CliError> {
        let mut cfg = base.clone();
        set_parameter(&mut cfg, &search.parameter, v)?;
        cfg.validate()?;
        stable(&cfg)
    };
    if !at(search.lo)? {
        return Ok((search.lo, Bracket::Empty));
    }
    if at(search.hi)? {
        return Ok((search.hi, Bracket::Open));
    }
    let (mut good, mut bad) = (search.lo, search.hi);
    for _ in 0..steps {
        let mid = 0.5 * (good + bad);
        if at(mid)? {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok((good, Bracket::Interior))
}

pub fn run_frontier(run: &RunConfig) -> Result<String, CliError> {
    run.check_mode(Mode::Frontier)?;
    let spec = run
        .frontier
        .as_ref()
        .ok_or_else(|| CliError::Config("frontier mode needs a `frontier` block".into()))?;
    if spec.search.lo.partial_cmp(&spec.search.hi) != Some(std::cmp::Ordering::Less) {
        return Err(CliError::Config(format!(
            "search bracket [{}, {}] is empty",
            spec.search.lo, spec.search.hi
        )));
    }
    let grid = spec.grid.values()?;
    let strategies = if spec.strategies.is_empty() {
        vec![run.system.strategy]
    } else {
        spec.strategies.clone()
    };
    if strategies.contains(&Strategy::PriorityAgnostic) {
        return Err(CliError::Config(
            "the priority-agnostic benchmark has no analytical frontier".into(),
        ));
    }
    let mut points = Vec::with_capacity(strategies.len() * grid.len());
    for &strategy in &strategies {
        for &g in &grid {
            let mut cfg = run.system.clone();
            cfg.strategy = strategy;
            set_parameter(&mut cfg, &spec.grid.parameter, g)?;
            points.push((g, cfg));
        }
    }
    let results = points
        .par_iter()
        .map(|(_, cfg)| bisect(cfg, &spec.search, spec.bisection_steps))
        .collect::<Result<Vec<_>, CliError>>()?;
    let rows = points.iter().zip(results).map(|((g, cfg), (max, bracket))| {
        vec![
            num(*g),
            num(max),
            cfg.strategy.to_string(),
            bracket.as_str().to_string(),
        ]
    });
    csv_string(&FRONTIER_HEADER, rows)
}

fn simulate_rows(cfg: &SystemConfig, stats: &SimStats) -> Vec<Vec<String>> {
    let mut busy_above = 0.0f64;
    stats
        .classes
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let availability = (1.0 - busy_above).max(0.0);
            busy_above += 1.0 - c.level_pmf()[0];
            vec![
                num(cfg.theta_db),
                cfg.strategy.to_string(),
                (i + 1).to_string(),
                num(c.coverage()),
                num(c.gamma()),
                num(c.tsp()),
                num(c.tsp_half_width()),
                num(c.mean_queue()),
                num(availability),
                num(c.mean_wait()),
                num(c.mean_service()),
                num(c.mean_delay()),
                num(c.paoi()),
                num(c.drop_rate()),
                stats.warmup_reached.to_string(),
            ]
        })
        .collect()
}

fn seed_of(run: &RunConfig, seed: Option<u64>) -> u64 {
    seed.or(run.seed).unwrap_or(DEFAULT_SEED)
}

/// Monte Carlo campaign CSV; `seed` overrides the config seed.
pub fn run_simulate(run: &RunConfig, seed: Option<u64>) -> Result<String, CliError> {
    run.check_mode(Mode::Simulate)?;
    let stats = run_campaign(&run.system, &run.simulation, seed_of(run, seed))?;
    csv_string(&SIMULATE_HEADER, simulate_rows(&run.system, &stats))
}

/// As [`run_simulate`], plus a second CSV with one row per measured departure.
pub fn run_simulate_with_events(run: &RunConfig, seed: Option<u64>) -> Result<(String, String), CliError> {
    run.check_mode(Mode::Simulate)?;
    let (stats, events) = run_campaign_with_events(&run.system, &run.simulation, seed_of(run, seed))?;
    let summary = csv_string(&SIMULATE_HEADER, simulate_rows(&run.system, &stats))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for e in &events {
        w.serialize::<&DepartureEvent>(e)?;
    }
    if events.is_empty() {
        w.write_record(["realization", "slot", "device", "class", "wait_slots", "service_slots"])?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok((summary, String::from_utf8(bytes).expect("csv output is UTF-8")))
}
