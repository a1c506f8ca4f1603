use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gaugetherm::gauge::apply_gauge;
use gaugetherm::master_equation::liouvillian;
use gaugetherm::path::rk4;
use gaugetherm::sampling::{random_gauge, random_model, random_state, GaugeOptions, ModelOptions};
use gaugetherm::thermo::thermo_sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DIMS: [usize; 3] = [2, 4, 8];

fn setup(dim: usize) -> (gaugetherm::GaugedModel, gaugetherm::CMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(dim as u64);
    let opts = ModelOptions {
        mixed_signature: false,
        ..ModelOptions::new(dim, 3)
    };
    let model = random_model(&mut rng, &opts);
    let gauge = random_gauge(&mut rng, &[1.0; 3], &GaugeOptions::default());
    let gm = apply_gauge(&model, &gauge).expect("valid gauge");
    let rho = random_state(&mut rng, dim, 0.2).into_matrix();
    (gm, rho)
}

fn kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("liouvillian");
    for dim in DIMS {
        let (gm, rho) = setup(dim);
        group.bench_with_input(BenchmarkId::from_parameter(dim), &dim, |b, _| {
            b.iter(|| liouvillian(&gm.transformed, black_box(0.3), black_box(&rho)).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("rk4_step");
    for dim in DIMS {
        let (gm, rho) = setup(dim);
        group.bench_with_input(BenchmarkId::from_parameter(dim), &dim, |b, _| {
            b.iter(|| rk4(&gm.base, black_box(0.3), 1e-3, black_box(&rho)).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("apply_gauge");
    for dim in DIMS {
        let (gm, _) = setup(dim);
        group.bench_with_input(BenchmarkId::from_parameter(dim), &dim, |b, _| {
            b.iter(|| apply_gauge(black_box(&gm.base), &gm.gauge).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("thermo_sample");
    for dim in DIMS {
        let (gm, rho) = setup(dim);
        group.bench_with_input(BenchmarkId::from_parameter(dim), &dim, |b, _| {
            b.iter(|| thermo_sample(&gm, black_box(0.3), black_box(&rho)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
