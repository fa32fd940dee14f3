use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spreadwave_core::optimizer::{default_lambda_max, optimize_spread, policy_curve};
use spreadwave_core::scaling::{default_surface_grids, spread_surface};
use spreadwave_core::spread::{general_spread_dimensionless, inverse_spread_volumes, spread_minimum};
use spreadwave_core::stats::log_space;
use spreadwave_core::{ExecutionModel, PnLParams, SpreadLaw, SpreadSurfaceParams};

fn spread_laws(c: &mut Criterion) {
    let volumes = log_space(1e-2, 1e3, 1000);
    c.bench_function("dimensionless spread x1000", |b| {
        b.iter(|| {
            volumes
                .iter()
                .map(|&v| general_spread_dimensionless(black_box(10.0), v).unwrap())
                .sum::<f64>()
        })
    });
    c.bench_function("spread minimum", |b| b.iter(|| spread_minimum(black_box(10.0))));
    c.bench_function("inverse spread volumes", |b| {
        b.iter(|| inverse_spread_volumes(black_box(10.0), black_box(5.0)))
    });
}

fn surface(c: &mut Criterion) {
    let params = SpreadSurfaceParams::new(3.5, 0.5, 1e-3, 100.0, 0.01);
    let (volumes, horizons) = default_surface_grids(1.0, 1e5, 1.0, 1e4).unwrap();
    c.bench_function("spread surface 20x50", |b| {
        b.iter(|| spread_surface(&params, 100.0, black_box(&volumes), &horizons).unwrap())
    });
}

fn optimizer(c: &mut Criterion) {
    let model = ExecutionModel::new(3.0).unwrap();
    let lambda_max = default_lambda_max(&model);
    let law = SpreadLaw::bid_ask(10.0).unwrap();
    let params = PnLParams {
        commission_alpha: 3.0,
        volume_v: 1.71,
        law,
        lambda_ref: 1.0,
    };
    c.bench_function("optimize one point", |b| {
        b.iter(|| optimize_spread(black_box(&params), &model, lambda_max).unwrap())
    });

    let mut group = c.benchmark_group("policy curve");
    for points in [41, 401] {
        let volumes = log_space(0.171, 17.1, points);
        group.bench_with_input(BenchmarkId::from_parameter(points), &volumes, |b, v| {
            b.iter(|| policy_curve(v, law, 3.0, 1.0, &model, lambda_max).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, spread_laws, surface, optimizer);
criterion_main!(benches);
