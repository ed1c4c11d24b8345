//! Benchmarks for the hot numeric kernels: amplitude evaluation, rotated
//! sums, sampling sweeps, the exact partition function and the gradient.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nnqe::dataset::MeasurementRecord;
use nnqe::exactsim::{Axis, BasisAssignment};
use nnqe::rbm::RbmWavefunction;
use nnqe::sampler::{draw_samples, SamplerConfig};
use nnqe::seeding::derive_rng;
use nnqe::trainer;
use num_complex::Complex64;
use rand::Rng;

fn test_rbm(n: usize) -> RbmWavefunction {
    let mut rng = derive_rng(77, "bench/rbm");
    let mut draw = |count: usize| -> Vec<Complex64> {
        (0..count)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect()
    };
    let a = draw(n);
    let d = draw(n);
    let w = draw(n * n);
    RbmWavefunction::new(n, n, a, d, w).unwrap()
}

fn bench_log_psi(c: &mut Criterion) {
    let rbm = test_rbm(12);
    let sigma: Vec<u8> = (0..12).map(|q| (q % 2) as u8).collect();
    c.bench_function("log_psi_n12", |b| {
        b.iter(|| rbm.log_psi(black_box(&sigma)).unwrap())
    });
}

fn bench_rotated_amplitude(c: &mut Criterion) {
    let rbm = test_rbm(12);
    let mut group = c.benchmark_group("rotated_amplitude_n12");
    for off_basis in [2usize, 4, 8] {
        let axes: Vec<Axis> = (0..12)
            .map(|q| if q < off_basis { Axis::X } else { Axis::Z })
            .collect();
        let record = MeasurementRecord::new(
            BasisAssignment::new(axes).unwrap(),
            vec![0u8; 12],
        )
        .unwrap();
        group.bench_with_input(
            BenchmarkId::from_parameter(off_basis),
            &record,
            |b, record| b.iter(|| rbm.rotated_amplitude(black_box(record)).unwrap()),
        );
    }
    group.finish();
}

fn bench_sampling(c: &mut Criterion) {
    let rbm = test_rbm(10);
    let cfg = SamplerConfig {
        betas: vec![0.2, 0.4, 0.6, 0.8, 1.0],
        sweeps_burn_in: 20,
        sweeps_between_samples: 1,
        seed: 5,
    };
    c.bench_function("draw_samples_1000_n10_5chains", |b| {
        b.iter(|| draw_samples(black_box(&rbm), black_box(&cfg), 1000).unwrap())
    });
}

fn bench_log_partition(c: &mut Criterion) {
    let rbm = test_rbm(12);
    c.bench_function("log_partition_exact_n12", |b| {
        b.iter(|| rbm.log_partition_exact().unwrap())
    });
}

fn bench_gradient(c: &mut Criterion) {
    let rbm = test_rbm(8);
    let mut rng = derive_rng(78, "bench/grad");
    let basis = BasisAssignment::new(
        (0..8)
            .map(|q| if q % 4 == 0 { Axis::X } else { Axis::Z })
            .collect(),
    )
    .unwrap();
    let batch: Vec<MeasurementRecord> = (0..64)
        .map(|_| {
            let bits: Vec<u8> = (0..8).map(|_| u8::from(rng.random::<bool>())).collect();
            MeasurementRecord::new(basis.clone(), bits).unwrap()
        })
        .collect();
    let negative: Vec<Vec<u8>> = (0..64)
        .map(|_| (0..8).map(|_| u8::from(rng.random::<bool>())).collect())
        .collect();
    c.bench_function("gradient_batch64_n8", |b| {
        b.iter(|| trainer::gradient(black_box(&rbm), black_box(&batch), black_box(&negative)).unwrap())
    });
}

criterion_group!(
    benches,
    bench_log_psi,
    bench_rotated_amplitude,
    bench_sampling,
    bench_log_partition,
    bench_gradient
);
criterion_main!(benches);
