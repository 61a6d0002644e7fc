//! Parallel vs sequential throughput on the two hot loops: Monte Carlo
//! path simulation and batch kernel evaluation.
//!
//! The parallel path uses the same fixed batching as the sequential one
//! (results are bitwise identical); the comparison isolates the rayon
//! dispatch overhead and the scaling headroom.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use heiswiener::exec;
use heiswiener::kernel::{kernel_eval_radial, KernelConfig};
use heiswiener::sampler::{endpoint_statistics, RngStreamSpec};
use heiswiener::stats::Moments;
use std::hint::black_box;

fn bench_sampler(c: &mut Criterion) {
    let mut group = c.benchmark_group("endpoint_moments");
    group.sample_size(10);
    for &n_paths in &[2_000usize, 8_000] {
        group.bench_with_input(BenchmarkId::new("parallel", n_paths), &n_paths, |b, &n| {
            b.iter(|| {
                endpoint_statistics(1, 1.0, 100, n, RngStreamSpec::new(7, 0), &[0.25]).unwrap()
            })
        });
        group.bench_with_input(BenchmarkId::new("sequential", n_paths), &n_paths, |b, &n| {
            b.iter(|| {
                exec::with_thread_count(1, || {
                    endpoint_statistics(1, 1.0, 100, n, RngStreamSpec::new(7, 0), &[0.25]).unwrap()
                })
            })
        });
    }
    group.finish();
}

fn bench_kernel_batch(c: &mut Criterion) {
    let cfg = KernelConfig::new(1);
    let points: Vec<(f64, f64)> = (0..512)
        .map(|i| {
            let rho = 6.0 * (i % 32) as f64 / 32.0;
            let u = 24.0 * (i / 32) as f64 / 16.0;
            (rho * rho, u)
        })
        .collect();
    let eval_all = |pts: &[(f64, f64)]| {
        let vals = exec::map_collect(pts.len(), |i| {
            kernel_eval_radial(&cfg, 1.0, pts[i].0, pts[i].1).unwrap().0
        });
        let mut m = Moments::default();
        for v in vals {
            m.push(v);
        }
        m.sum
    };
    let mut group = c.benchmark_group("kernel_batch_512");
    group.sample_size(10);
    group.bench_function("parallel", |b| b.iter(|| black_box(eval_all(&points))));
    group.bench_function("sequential", |b| {
        b.iter(|| exec::with_thread_count(1, || black_box(eval_all(&points))))
    });
    group.finish();
}

criterion_group!(benches, bench_sampler, bench_kernel_batch);
criterion_main!(benches);
