use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use spiked_gen::experiments::{run_scaling, ExperimentConfig};
use spiked_gen::landscape::wdc_deviations;
use spiked_gen::{sample_gaussian_network, Execution, VarianceMode};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn wdc(c: &mut Criterion) {
    let net = sample_gaussian_network(&[5, 400, 1600], VarianceMode::Experiment, 3).unwrap();
    let w = net.weights()[0].view();
    let mut group = c.benchmark_group("wdc_deviations");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(wdc_deviations(w, 32, 11, exec).unwrap()))
        });
    }
    group.finish();
}

fn scaling(c: &mut Criterion) {
    let base = ExperimentConfig {
        k_list: vec![5],
        n1: 60,
        n: 300,
        theta_list: vec![0.4],
        trials: 8,
        ..Default::default()
    };
    let mut group = c.benchmark_group("scaling_trials");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = ExperimentConfig {
            execution: exec,
            ..base.clone()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(run_scaling(&cfg).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, wdc, scaling);
criterion_main!(benches);
