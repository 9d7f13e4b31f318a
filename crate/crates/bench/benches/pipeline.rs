use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sense_forge::harness::{generate_instance, InstanceConfig};
use sense_forge::pipeline::run_pipeline;
use sense_forge::policy::Policies;

fn pipeline(c: &mut Criterion) {
    let policies = Policies::heuristic();
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    for preset in ["tdrive_small", "tdrive_medium", "grab_medium"] {
        let instance = generate_instance(&InstanceConfig::preset(preset).unwrap(), 5).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(preset), &instance, |b, inst| {
            b.iter(|| run_pipeline(black_box(inst), &policies).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, pipeline);
criterion_main!(benches);
