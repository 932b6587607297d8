use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use liestoch::connection::{ConnectionFunction, Covector};
use liestoch::grid::TimeGrid;
use liestoch::integrals::group_ito_integral;
use liestoch::nalgebra::DVector;
use liestoch::registry;
use liestoch::rng::NoiseSpec;
use liestoch::sampler;

fn group_kernels(c: &mut Criterion) {
    let mut g = c.benchmark_group("kernels");
    for name in ["so3", "su2", "heis3"] {
        let group = registry::group(name).unwrap();
        let x = group
            .algebra_vector(DVector::from_vec(vec![0.3, -0.7, 0.4]))
            .unwrap();
        g.bench_function(format!("exp/{name}"), |b| {
            b.iter(|| group.exp_matrix(black_box(x.coords())).unwrap())
        });
        let m = group.exp_matrix(x.coords()).unwrap();
        g.bench_function(format!("log/{name}"), |b| {
            b.iter(|| group.log_matrix(black_box(&m)).unwrap())
        });
        g.bench_function(format!("project/{name}"), |b| {
            b.iter(|| group.project_matrix(black_box(&m)).unwrap())
        });
    }
    g.finish();
}

fn sampling(c: &mut Criterion) {
    let so3 = registry::group("so3").unwrap();
    let grid = TimeGrid::new(1.0, 1000).unwrap();
    let noise = NoiseSpec::new(42, 0);
    let mut g = c.benchmark_group("sampling");
    g.sample_size(20);
    g.bench_function("flat_bm/so3/N=1000", |b| {
        b.iter(|| sampler::sample_flat_bm(&so3, &grid, black_box(&noise)).unwrap())
    });
    g.bench_function("group_bm/so3/N=1000", |b| {
        b.iter(|| sampler::sample_group_bm(&so3, &grid, black_box(&noise)).unwrap())
    });
    let path = sampler::sample_group_bm(&so3, &grid, &noise).unwrap();
    g.bench_function("stochastic_log/so3/N=1000", |b| {
        b.iter(|| sampler::stochastic_logarithm(black_box(&path)).unwrap())
    });
    g.finish();
}

fn integrals(c: &mut Criterion) {
    let so3 = registry::group("so3").unwrap();
    let grid = TimeGrid::new(1.0, 1000).unwrap();
    let path = sampler::sample_group_bm(&so3, &grid, &NoiseSpec::new(7, 0)).unwrap();
    let alpha = ConnectionFunction::bracket_multiple(&so3, 0.5);
    let theta = Covector::basis(&so3, 0).unwrap();
    c.bench_function("group_ito/so3/N=1000", |b| {
        b.iter(|| group_ito_integral(black_box(&theta), black_box(&path), &alpha).unwrap())
    });
}

criterion_group!(benches, group_kernels, sampling, integrals);
criterion_main!(benches);
