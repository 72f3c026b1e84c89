//! Rayon vs sequential comparison for the data-parallel kernels.
//!
//! Every hot loop dispatches through the crate's execution-policy switch, so
//! both paths run the same arithmetic in the same chunk order and produce
//! bitwise-identical results; this suite measures what the pool buys (or
//! costs) per kernel. Requires the default `parallel` feature: without it
//! only the sequential path exists and the comparison is meaningless.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use fmhd_core::decay::log_spaced;
use fmhd_core::field::{convective_term, SolenoidalField};
use fmhd_core::grid::WaveGrid;
use fmhd_core::solver::{rhs_nonlinear, MhdState};
use fmhd_core::spectral::{ContinuousMeasure, FractionalExponent, SpectralMeasure};

#[cfg(feature = "parallel")]
fn with_policy<R>(parallel: bool, f: impl FnOnce() -> R) -> R {
    fmhd_core::parallel::set_parallel(parallel);
    let out = f();
    fmhd_core::parallel::set_parallel(true);
    out
}

#[cfg(not(feature = "parallel"))]
fn with_policy<R>(_parallel: bool, f: impl FnOnce() -> R) -> R {
    f()
}

fn policy_pair(c: &mut Criterion, name: &str, mut work: impl FnMut()) {
    let mut group = c.benchmark_group(name);
    #[cfg(feature = "parallel")]
    group.bench_function("rayon", |b| {
        b.iter(|| with_policy(true, &mut work));
    });
    group.bench_function("sequential", |b| {
        b.iter(|| with_policy(false, &mut work));
    });
    group.finish();
}

fn bench_convective_term(c: &mut Criterion) {
    let grid = WaveGrid::new(32, 2.0 * std::f64::consts::PI).unwrap();
    let kc = grid.dealias_limit() as f64 * grid.dk();
    let u = SolenoidalField::random(&grid, 1, -1.0, kc);
    let v = SolenoidalField::random(&grid, 2, -1.0, kc);
    policy_pair(c, "convective_term_n32", || {
        black_box(convective_term(black_box(&u), black_box(&v)).unwrap());
    });
}

fn bench_rhs_nonlinear(c: &mut Criterion) {
    let grid = WaveGrid::new(32, 2.0 * std::f64::consts::PI).unwrap();
    let kc = grid.dealias_limit() as f64 * grid.dk();
    let u = SolenoidalField::random(&grid, 3, -1.0, kc);
    let b = SolenoidalField::random(&grid, 4, -1.0, kc);
    let state = MhdState::new(u, b).unwrap();
    policy_pair(c, "rhs_nonlinear_n32", || {
        black_box(rhs_nonlinear(black_box(&state), 8).unwrap());
    });
}

fn bench_quadrature(c: &mut Criterion) {
    let kappa = FractionalExponent::new(1.0).unwrap();
    let measure = SpectralMeasure::Continuous(
        ContinuousMeasure::power_law(-0.5, 1.0, 1.0, kappa, 1e4).unwrap(),
    );
    policy_pair(c, "weighted_norm_sq_powerlaw", || {
        let v = measure
            .weighted_norm_sq(|lam| (-200.0 * lam).exp())
            .unwrap();
        black_box(v);
    });
}

fn bench_decay_curve(c: &mut Criterion) {
    let kappa = FractionalExponent::new(0.8).unwrap();
    let measure = SpectralMeasure::Continuous(
        ContinuousMeasure::power_law(0.0, 1.0, 1.0, kappa, 1e4).unwrap(),
    );
    let ts = log_spaced(1e2, 1e4, 30);
    policy_pair(c, "linear_decay_curve", || {
        let curve = fmhd_core::decay::linear_decay_curve(&measure, kappa, &ts).unwrap();
        black_box(curve);
    });
}

fn bench_norms(c: &mut Criterion) {
    let grid = WaveGrid::new(32, 2.0 * std::f64::consts::PI).unwrap();
    let kc = grid.dealias_limit() as f64 * grid.dk();
    let f = SolenoidalField::random(&grid, 5, -1.0, kc);
    policy_pair(c, "lp_norm_four_n32", || {
        black_box(f.lp_norm(4.0));
    });
}

criterion_group!(
    benches,
    bench_convective_term,
    bench_rhs_nonlinear,
    bench_quadrature,
    bench_decay_curve,
    bench_norms
);
criterion_main!(benches);
