use coarsequant::coarse::{kohn_nirenberg, quantize, transplant, QuantizeOptions};
use coarsequant::diagnostics::{commutator_kernel, schur_bound};
use coarsequant::geometry::tangent_map;
use coarsequant::index::{angular_samples, toeplitz_index};
use coarsequant::liegroup::{bch_multiply, GradedAlgebra};
use coarsequant::symbol::{dirac1d, fft_nd, winding};
use coarsequant::{c64, ManifoldGrid};
use coarsequant_bench::circle;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn bench_transplant(c: &mut Criterion) {
    let mut group = c.benchmark_group("transplant");
    for conformal in [false, true] {
        let f = circle(256, conformal);
        let label = if conformal { "conformal" } else { "flat" };
        group.bench_function(BenchmarkId::new(label, 256), |b| {
            b.iter(|| transplant(&f.cos, &f.grid, black_box(&[1.0]), &f.legs).unwrap())
        });
    }
    group.finish();
}

fn bench_quantize(c: &mut Criterion) {
    let mut group = c.benchmark_group("quantize");
    group.sample_size(10);
    for n in [128, 256] {
        let f = circle(n, false);
        group.bench_with_input(BenchmarkId::from_parameter(n), &f, |b, f| {
            b.iter(|| quantize(&f.cos, &f.grid, &f.pou, &f.legs, QuantizeOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn bench_direct(c: &mut Criterion) {
    let grid = ManifoldGrid::circle(256, false);
    let sym = dirac1d();
    c.bench_function("kohn_nirenberg/256", |b| b.iter(|| kohn_nirenberg(&sym, black_box(&grid)).unwrap()));
}

fn bench_index(c: &mut Criterion) {
    let mut group = c.benchmark_group("toeplitz_index");
    group.sample_size(10);
    for n in [128, 256, 512] {
        let samples = angular_samples(&winding(1), n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &samples, |b, s| b.iter(|| toeplitz_index(s).unwrap()));
    }
    group.finish();
}

fn bench_kernels(c: &mut Criterion) {
    let data: Vec<c64> = (0..64 * 64).map(|k| c64::new((k as f64).sin(), (k as f64 * 0.3).cos())).collect();
    c.bench_function("fft_nd/64x64", |b| {
        b.iter(|| {
            let mut v = data.clone();
            fft_nd(&mut v, 64, 2, false);
            v
        })
    });
    let k = commutator_kernel(128, |t| (1.0 - t.abs() / 3.0).max(0.0), |x| x / (1.0 + x * x).sqrt());
    c.bench_function("schur_bound/257", |b| b.iter(|| schur_bound(black_box(&k))));
    let torus = ManifoldGrid::torus(64, 0.1, 0.0);
    c.bench_function("tangent_map/perturbed_torus", |b| {
        b.iter(|| tangent_map(&torus, black_box(&[1.0, 2.0]), black_box(&[0.2, -0.15])).unwrap())
    });
    let alg = GradedAlgebra::heisenberg();
    c.bench_function("bch_multiply/heisenberg", |b| {
        b.iter(|| bch_multiply(&alg, black_box(&[0.3, -0.2, 0.1]), black_box(&[0.5, 0.7, -0.4])).unwrap())
    });
}

criterion_group!(benches, bench_transplant, bench_quantize, bench_direct, bench_index, bench_kernels);
criterion_main!(benches);
