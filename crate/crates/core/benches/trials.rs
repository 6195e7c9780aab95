use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spin_squeeze::conditional::{conditional_experiment, MeasurementGain};
use spin_squeeze::ensemble::EnsembleSpec;
use spin_squeeze::par::{Execution, StreamKey};
use spin_squeeze::probe::{
    simulate_dual_probe, BackgroundPhase, CouplingStatistics, DualProbe, ProbeChannel,
};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn conditional(c: &mut Criterion) {
    let spec = EnsembleSpec::new(400).unwrap();
    let gain = MeasurementGain::with_kappa_squared(3.0, 400, 1e6).unwrap();
    let mut group = c.benchmark_group("conditional_experiment");
    group.sample_size(10);
    for trials in [10_000usize, 100_000] {
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, trials), &trials, |b, &t| {
                b.iter(|| conditional_experiment(&spec, &gain, t, StreamKey::new(1), exec).unwrap())
            });
        }
    }
    group.finish();
}

fn dual_probe(c: &mut Criterion) {
    let spec = EnsembleSpec::new(100_000).unwrap();
    let channel = ProbeChannel::new(
        1e2,
        1e4,
        CouplingStatistics::new(1e-4, 1e-14).unwrap(),
        BackgroundPhase::new(0.0, 1e-4).unwrap(),
    )
    .unwrap();
    let probes = DualProbe::new(channel, channel).unwrap();
    let mut group = c.benchmark_group("dual_probe_trials");
    group.sample_size(10);
    let trials = 100_000;
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| {
                let shots = spin_squeeze::par::map_trials(trials, StreamKey::new(2), exec, |rng| {
                    simulate_dual_probe(&probes, &spec, rng).difference
                });
                black_box(shots)
            })
        });
    }
    group.finish();
}

criterion_group!(benches, conditional, dual_probe);
criterion_main!(benches);
