use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qnd_core::gaussian_prep::violation_scan_with;
use qnd_core::moments::{CrossCovariances, Ordering, ProbeMoments, Scenario, SystemMoments, Variable};
use qnd_core::oracle::{stages, OracleOptions, OracleSetup, ProbabilityTable};
use qnd_core::sampler::{sample_outcomes_with, Distribution};
use qnd_core::Exec;

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn scan(c: &mut Criterion) {
    let mut group = c.benchmark_group("violation_scan_200x200");
    for (name, exec) in POLICIES {
        group.bench_function(name, |b| {
            b.iter(|| violation_scan_with(black_box((0.25, 4.0)), (-0.99, 0.99), (200, 200), exec).unwrap())
        });
    }
    group.finish();
}

fn sampler(c: &mut Criterion) {
    let values: Vec<f64> = (0..512).map(|i| (i as f64 - 255.5) * 0.05).collect();
    let weights: Vec<f64> = values.iter().map(|v| (-v * v / 2.0).exp()).collect();
    let total: f64 = weights.iter().sum();
    let table = ProbabilityTable::new(values, weights.iter().map(|w| w / total).collect(), 0.05).unwrap();
    let mut group = c.benchmark_group("sample_outcomes_1e6");
    for (name, exec) in POLICIES {
        group.bench_function(name, |b| {
            b.iter(|| {
                sample_outcomes_with(Distribution::Single(Variable::X, &table), 1_000_000, black_box(7), "bench", exec).unwrap()
            })
        });
    }
    group.finish();
}

fn oracle(c: &mut Criterion) {
    let h = 0.5f64.sqrt();
    let s = Scenario::canonical(
        SystemMoments::new(h, h),
        ProbeMoments::new(Variable::X, 0.5, 1.0),
        ProbeMoments::new(Variable::K, 0.5, 1.0),
        CrossCovariances::default(),
        Ordering::Joint,
    );
    let run = stages(Ordering::Joint);
    let mut group = c.benchmark_group("oracle_joint_run");
    group.sample_size(10);
    for n in [64usize, 128] {
        for (name, exec) in POLICIES {
            let setup =
                OracleSetup::new(&s, None, std::slice::from_ref(&run), OracleOptions { n, extent_sigmas: 6.0, exec }).unwrap();
            group.bench_with_input(BenchmarkId::new(name, n), &setup, |b, setup| b.iter(|| setup.run(black_box(&run)).unwrap()));
        }
    }
    group.finish();
}

criterion_group!(benches, scan, sampler, oracle);
criterion_main!(benches);
