use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use vacqnet_bench::{network, short_campaign};
use vacqnet_core::sim::{generate_realization, simulate};
use vacqnet_core::Strategy;

fn slots(c: &mut Criterion) {
    let sim = short_campaign(200);
    let mut group = c.benchmark_group("simulated slots");
    group.sample_size(10);
    group.throughput(Throughput::Elements(sim.slots as u64));
    for strategy in [Strategy::Shared, Strategy::DedicatedEa, Strategy::PriorityAgnostic] {
        let cfg = vacqnet_core::SystemConfig {
            channels: 8,
            ..network(-14.0, strategy)
        };
        let real = generate_realization(&cfg, sim.area_km, 1).unwrap();
        group.bench_function(strategy.as_str(), |b| {
            b.iter(|| simulate(black_box(&real), &cfg, &sim, 7).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, slots);
criterion_main!(benches);
