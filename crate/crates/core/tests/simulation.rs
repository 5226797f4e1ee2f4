use vacqnet_core::priority_chain::build_class_chains;
use vacqnet_core::sim::{
    derive_seeds, generate_realization, run_campaign, simulate, NetworkRealization, SimConfig,
};
use vacqnet_core::steady_state::solve_class;
use vacqnet_core::{SolveMethod, Strategy, SystemConfig};

fn small_network(strategy: Strategy, theta_db: f64) -> SystemConfig {
    SystemConfig {
        channels: 8,
        theta_db,
        strategy,
        ..SystemConfig::default()
    }
}

fn short_run(realizations: usize, slots: usize) -> SimConfig {
    SimConfig {
        area_km: 1.5,
        realizations,
        slots,
        ..SimConfig::default()
    }
}

#[test]
fn lone_device_succeeds_with_noise_only_probability() {
    // rho = sigma^2, so success means a unit-mean exponential fade clears theta.
    let cfg = SystemConfig {
        alphas: vec![1.0],
        queue_sizes: vec![1],
        channels: 1,
        theta_db: 0.0,
        ..SystemConfig::default()
    };
    let real = NetworkRealization::from_points(
        2.0,
        vec![[1.0, 1.0]],
        vec![[1.2, 0.9]],
        cfg.rho_watts(),
        cfg.eta,
    )
    .unwrap();
    let sim = SimConfig {
        slots: 40_000,
        warmup_max_slots: 0,
        ..SimConfig::default()
    };
    let stats = simulate(&real, &cfg, &sim, 11).unwrap();
    let c = &stats.classes[0];
    let expected = (-1.0f64).exp();
    let sd = (expected * (1.0 - expected) / c.attempts as f64).sqrt();
    assert!(c.attempts + 1 >= 40_000);
    assert!((c.coverage() - expected).abs() < 3.0 * sd, "{} vs {expected}", c.coverage());
}

#[test]
fn base_station_counts_are_poisson() {
    let cfg = SystemConfig::default();
    let side = 2.0;
    let mean = cfg.lambda_per_km2 * side * side;
    let counts: Vec<f64> = (0..200)
        .map(|s| generate_realization(&cfg, side, s).unwrap().num_base_stations() as f64)
        .collect();
    let m = counts.iter().sum::<f64>() / counts.len() as f64;
    let var = counts.iter().map(|c| (c - m).powi(2)).sum::<f64>() / (counts.len() - 1) as f64;
    assert!((m - mean).abs() < 3.0 * (mean / 200.0).sqrt(), "mean {m}");
    assert!((var / mean - 1.0).abs() < 0.3, "dispersion {}", var / mean);
}

#[test]
fn fixed_coverage_queues_follow_the_chains() {
    let p = vec![0.6, 0.5];
    let cfg = SystemConfig {
        alphas: vec![0.15, 0.2],
        queue_sizes: vec![4, 4],
        channels: 8,
        ..SystemConfig::default()
    };
    let sim = SimConfig {
        fixed_coverage: Some(p.clone()),
        ..short_run(4, 4000)
    };
    let stats = run_campaign(&cfg, &sim, 5).unwrap();
    let chains = build_class_chains(&cfg.classes(), &p).unwrap();
    for (c, blocks) in stats.classes.iter().zip(&chains) {
        let analytic = solve_class(blocks, SolveMethod::Direct).unwrap().level_pmf();
        let samples: u64 = c.level_counts.iter().sum();
        for (got, want) in c.level_pmf().iter().zip(&analytic) {
            // Queues are autocorrelated; allow a generous multiple of the i.i.d. error.
            let sd = (want * (1.0 - want) / samples as f64).sqrt();
            assert!((got - want).abs() < 3.0 * sd + 0.01, "{got} vs {want}");
        }
        assert!((c.gamma() - solve_class(blocks, SolveMethod::Direct).unwrap().gamma).abs() < 0.01);
    }
}

#[test]
fn dedicated_channels_never_mix_classes() {
    for strategy in [Strategy::DedicatedEa, Strategy::DedicatedWa] {
        let stats = run_campaign(&small_network(strategy, -10.0), &short_run(2, 500), 3).unwrap();
        assert_eq!(stats.mixed_class_channel_slots, 0);
    }
    let shared = run_campaign(&small_network(Strategy::Shared, -10.0), &short_run(2, 500), 3).unwrap();
    assert!(shared.mixed_class_channel_slots > 0);
}

#[test]
fn shared_pool_gives_every_class_the_same_success_rate() {
    let stats = run_campaign(&small_network(Strategy::Shared, -14.0), &short_run(4, 2000), 21).unwrap();
    let p: Vec<f64> = stats.classes.iter().map(|c| c.coverage()).collect();
    for w in p.windows(2) {
        assert!((w[0] - w[1]).abs() < 0.02, "{p:?}");
    }
}

#[test]
fn half_width_shrinks_with_realizations() {
    let cfg = small_network(Strategy::Shared, -14.0);
    let short = run_campaign(&cfg, &short_run(4, 300), 8).unwrap();
    let long = run_campaign(&cfg, &short_run(16, 300), 8).unwrap();
    for (a, b) in short.classes.iter().zip(&long.classes) {
        assert_eq!(b.realization_tsp.len(), 16);
        let ratio = b.tsp_half_width() / a.tsp_half_width();
        // Four times the realizations: about half the width.
        assert!((0.25..0.85).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn campaigns_are_reproducible() {
    let cfg = small_network(Strategy::Shared, -12.0);
    let sim = short_run(3, 300);
    assert_eq!(run_campaign(&cfg, &sim, 42).unwrap(), run_campaign(&cfg, &sim, 42).unwrap());
    assert_ne!(
        run_campaign(&cfg, &sim, 42).unwrap().classes,
        run_campaign(&cfg, &sim, 43).unwrap().classes
    );
}

#[test]
fn single_realization_campaign_is_one_simulation() {
    let cfg = small_network(Strategy::DedicatedEa, -12.0);
    let sim = short_run(1, 400);
    let (geo, dynamics) = derive_seeds(9, 0);
    let real = generate_realization(&cfg, sim.area_km, geo).unwrap();
    let direct = simulate(&real, &cfg, &sim, dynamics).unwrap();
    assert_eq!(run_campaign(&cfg, &sim, 9).unwrap(), direct);
}
