use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, DVector};

use vacqnet_core::fixed_point::{class_coverage, solve_network, solve_network_with_init};
use vacqnet_core::metrics::{mean_queue_length, mean_service, mean_wait_exact, network_metrics};
use vacqnet_core::priority_chain::{build_class_chains, build_joint_oracle_chain, DEFAULT_ORACLE_CAP};
use vacqnet_core::steady_state::{solve_class, solve_direct};
use vacqnet_core::{SolveMethod, Strategy, SystemConfig, SteadyState, TrafficClass};

const CLASS_ONE: [f64; 7] = [
    0.800000301068341,
    0.177777844681854,
    0.0197530938535393,
    0.00219478820594881,
    2.43865e-4,
    2.7096e-5,
    3.011e-6,
];
const CLASS_TWO: [f64; 6] = [0.0251053, 0.0619813, 0.0941060, 0.1468515, 0.2302275, 0.4417285];

fn two_class_example() -> (Vec<TrafficClass>, [f64; 2]) {
    (
        vec![TrafficClass::new(1, 0.1, 6), TrafficClass::new(2, 0.5, 5)],
        [0.5, 0.5],
    )
}

fn steady_states(classes: &[TrafficClass], p: &[f64], method: SolveMethod) -> Vec<SteadyState> {
    build_class_chains(classes, p)
        .unwrap()
        .iter()
        .map(|b| solve_class(b, method).unwrap())
        .collect()
}

#[test]
fn two_class_level_pmfs_match_reference() {
    let (classes, p) = two_class_example();
    for method in [SolveMethod::Direct, SolveMethod::Mam] {
        let s = steady_states(&classes, &p, method);
        for (got, want) in s[0].level_pmf().iter().zip(CLASS_ONE) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-6);
        }
        for (got, want) in s[1].level_pmf().iter().zip(CLASS_TWO) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-6);
        }
    }
}

#[test]
fn two_class_queue_mean_and_availability() {
    let (classes, p) = two_class_example();
    let s = steady_states(&classes, &p, SolveMethod::Direct);
    let dot: f64 = CLASS_ONE.iter().enumerate().map(|(n, x)| n as f64 * x).sum();
    assert_abs_diff_eq!(mean_queue_length(&s[0]), dot, epsilon = 1e-6);
    // Class 2 is available whenever class 1 is empty.
    assert_abs_diff_eq!(s[0].level_pmf()[0], 0.800000301, epsilon = 1e-9);
}

#[test]
fn two_class_server_shares_match_joint_chain() {
    let (classes, p) = two_class_example();
    let oracle = build_joint_oracle_chain(&classes, &p, DEFAULT_ORACLE_CAP).unwrap();
    let pi = oracle.stationary().unwrap();
    let s = steady_states(&classes, &p, SolveMethod::Mam);
    let idx = oracle.index();
    let mut higher_empty = 0.0;
    let mut both_empty = 0.0;
    for (state, &mass) in pi.iter().enumerate() {
        let n = idx.decode(state);
        if n[0] == 0 {
            higher_empty += mass;
            if n[1] == 0 {
                both_empty += mass;
            }
        }
    }
    assert_abs_diff_eq!(s[1].gamma, higher_empty, epsilon = 1e-9);
    assert_abs_diff_eq!(s[1].zeta, higher_empty - both_empty, epsilon = 1e-9);
    assert_abs_diff_eq!(s[1].delta_component, both_empty, epsilon = 1e-9);
}

#[test]
fn three_class_all_empty_matches_joint_chain() {
    let classes = vec![
        TrafficClass::new(1, 0.1, 3),
        TrafficClass::new(2, 0.2, 2),
        TrafficClass::new(3, 0.3, 3),
    ];
    let p = [0.6, 0.5, 0.7];
    let oracle = build_joint_oracle_chain(&classes, &p, DEFAULT_ORACLE_CAP).unwrap();
    let pi = oracle.stationary().unwrap();
    let s = steady_states(&classes, &p, SolveMethod::Mam);
    assert_abs_diff_eq!(s[2].delta_component, pi[0], epsilon = 1e-9);
    for i in 1..=3 {
        let marginal = oracle.class_marginal(&pi, i);
        for (a, b) in s[i - 1].level_pmf().iter().zip(&marginal) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-9);
        }
    }
}

/// Expected slots `h[r][s]` until `r` departures of class `i` (1-based),
/// starting with the higher classes in joint state `s`.
///
/// Class `i` transmits only in slots that start and end with every higher
/// queue empty, and then departs with probability `p_i`.
fn first_passage(classes: &[TrafficClass], p: &[f64], i: usize, depth: usize) -> Vec<DVector<f64>> {
    let higher = if i == 1 {
        DMatrix::from_element(1, 1, 1.0)
    } else {
        build_joint_oracle_chain(&classes[..i - 1], &p[..i - 1], DEFAULT_ORACLE_CAP)
            .unwrap()
            .to_dense()
    };
    let n = higher.nrows();
    let pi = p[i - 1];
    let mut stay = higher.clone();
    stay[(0, 0)] *= 1.0 - pi;
    let lhs = (DMatrix::identity(n, n) - stay).lu();
    let mut h = vec![DVector::zeros(n)];
    for r in 1..=depth {
        let mut rhs = DVector::from_element(n, 1.0);
        rhs[0] += higher[(0, 0)] * pi * h[r - 1][0];
        h.push(lhs.solve(&rhs).unwrap());
    }
    h
}

#[test]
fn mean_wait_and_service_match_first_passage() {
    let cases: Vec<(Vec<TrafficClass>, Vec<f64>)> = vec![
        (vec![TrafficClass::new(1, 0.3, 3)], vec![0.6]),
        (
            vec![TrafficClass::new(1, 0.2, 2), TrafficClass::new(2, 0.3, 3)],
            vec![0.7, 0.5],
        ),
        (
            vec![TrafficClass::new(1, 0.4, 3), TrafficClass::new(2, 0.1, 2)],
            vec![0.9, 0.3],
        ),
    ];
    for (classes, p) in cases {
        let chains = build_class_chains(&classes, &p).unwrap();
        let oracle = build_joint_oracle_chain(&classes, &p, DEFAULT_ORACLE_CAP).unwrap();
        let pi = oracle.stationary().unwrap();
        for (c, blocks) in chains.iter().enumerate() {
            let i = c + 1;
            let x = solve_direct(&blocks.transition_matrix()).unwrap();
            let steady = SteadyState::new(x, blocks.phases(), false);
            let k = classes[c].queue_size;
            let h = first_passage(&classes, &p, i, k);
            let joint = oracle.prefix_distribution(&pi, i);
            let m = blocks.phases();
            let expected: f64 = (1..=k)
                .map(|l| (0..m).map(|s| joint[l * m + s] * h[l][s]).sum::<f64>())
                .sum();
            assert_abs_diff_eq!(mean_wait_exact(&steady, blocks).unwrap(), expected, epsilon = 1e-10);
            assert_abs_diff_eq!(mean_service(&blocks.service).unwrap(), h[1][0], epsilon = 1e-10);
        }
    }
}

fn defaults(theta_db: f64, strategy: Strategy) -> SystemConfig {
    SystemConfig {
        theta_db,
        strategy,
        ..SystemConfig::default()
    }
}

#[test]
fn reference_tsp_at_minus_18_db() {
    let cases = [
        (Strategy::Shared, [0.9569, 0.8569, 0.5791]),
        (Strategy::DedicatedEa, [0.9748, 0.8595, 0.5697]),
    ];
    for (strategy, want) in cases {
        let sol = solve_network(&defaults(-18.0, strategy)).unwrap();
        assert!(sol.converged);
        for (got, w) in sol.tsp().iter().zip(want) {
            assert_abs_diff_eq!(*got, w, epsilon = 0.02);
        }
    }
}

#[test]
fn fixed_point_is_unique_and_stationary() {
    let cfg = defaults(-18.0, Strategy::Shared);
    let a = solve_network_with_init(&cfg, 1.0, &[0.0; 3]).unwrap();
    let b = solve_network_with_init(&cfg, 0.0, &[1.0; 3]).unwrap();
    assert!(a.converged && b.converged);
    for (x, y) in a.coverage.iter().zip(&b.coverage) {
        assert_abs_diff_eq!(*x, *y, epsilon = 10.0 * cfg.epsilon);
    }
    let again = class_coverage(&cfg, a.delta, &a.zetas()).unwrap();
    for (x, y) in a.coverage.iter().zip(&again) {
        assert_abs_diff_eq!(*x, *y, epsilon = 10.0 * cfg.epsilon);
    }
}

fn coverage_sweep(strategy: Strategy, from_db: f64, to_db: f64) -> Vec<Vec<f64>> {
    let steps = (to_db - from_db) as usize;
    (0..=steps)
        .map(|s| solve_network(&defaults(from_db + s as f64, strategy)).unwrap().coverage)
        .collect()
}

fn assert_non_increasing(sweep: &[Vec<f64>], classes: std::ops::Range<usize>, what: &str) {
    for w in sweep.windows(2) {
        for i in classes.clone() {
            assert!(w[1][i] <= w[0][i] + 1e-9, "{what}, class {}: {} > {}", i + 1, w[1][i], w[0][i]);
        }
    }
}

#[test]
fn shared_coverage_degrades_with_threshold() {
    assert_non_increasing(&coverage_sweep(Strategy::Shared, -20.0, 0.0), 0..3, "shared");
}

#[test]
fn dedicated_coverage_degrades_until_starvation() {
    for strategy in [Strategy::DedicatedEa, Strategy::DedicatedWa] {
        let sweep = coverage_sweep(strategy, -20.0, 0.0);
        assert_non_increasing(&sweep, 0..1, strategy.as_str());
        assert_non_increasing(&sweep[..=10], 0..3, strategy.as_str());
    }
}

#[test]
fn starved_class_sees_quieter_dedicated_channels() {
    // Once class 2 saturates, class 3 rarely transmits and its own channels clear up.
    let before = solve_network(&defaults(-8.0, Strategy::DedicatedEa)).unwrap();
    let after = solve_network(&defaults(-6.0, Strategy::DedicatedEa)).unwrap();
    assert!(after.overflow_flags()[1]);
    assert!(after.zetas()[2] < before.zetas()[2]);
    assert!(after.coverage[2] > before.coverage[2]);
}

#[test]
fn shared_tsp_is_ordered_by_priority() {
    let sol = solve_network(&defaults(-12.0, Strategy::Shared)).unwrap();
    let tsp = sol.tsp();
    assert!(tsp.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn weighted_split_overflows_at_high_threshold() {
    let sol = solve_network(&defaults(0.0, Strategy::DedicatedWa)).unwrap();
    assert!(sol.overflow_flags()[0]);
}

#[test]
fn lower_arrival_rate_means_older_updates_at_low_threshold() {
    let sol = solve_network(&defaults(-20.0, Strategy::Shared)).unwrap();
    let m = network_metrics(&sol, Some(1)).unwrap();
    assert!(m[0].paoi > m[1].paoi);
}

#[test]
fn waiting_pmf_at_minus_10_db() {
    let sol = solve_network(&defaults(-10.0, Strategy::Shared)).unwrap();
    let m = network_metrics(&sol, None).unwrap();
    let w = &m[0].waiting;
    assert_abs_diff_eq!(w.pmf.iter().sum::<f64>() + w.tail, 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(w.pmf[0], 0.884, epsilon = 0.03);
    let truncated: f64 = w.pmf.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
    assert!((truncated - m[0].mean_wait).abs() < 1e-6);
}

#[test]
fn starved_class_has_finite_positive_delays() {
    // Two nearly saturated higher classes leave class 3 a share of about 1e-16.
    let cfg = SystemConfig {
        alphas: vec![0.9897, 0.9666, 0.3651],
        queue_sizes: vec![2, 3, 1],
        ..SystemConfig::default()
    };
    let p = [0.2682, 0.6314, 0.7481];
    let chains = build_class_chains(&cfg.classes(), &p).unwrap();
    let steady = solve_class(&chains[2], SolveMethod::Mam).unwrap();
    assert!(steady.gamma < 1e-12);
    let service = mean_service(&chains[2].service).unwrap();
    assert!(service.is_finite() && service > 1e12, "{service}");
    let wait = mean_wait_exact(&steady, &chains[2]).unwrap();
    assert!(wait.is_finite() && wait >= 0.0, "{wait}");
}
