//! Gauss–Legendre quadrature on logarithmically spaced panels.
//!
//! Spectral integrands of the form `m(λ)² ρ(λ)` concentrate near `λ = 0` as
//! the semigroup time grows, so panels are placed uniformly in `ln λ` and the
//! rule integrates `g(x) e^x` with `x = ln λ`. Node/weight pairs come from
//! Newton iteration on the Legendre recurrence.

use crate::parallel;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, d) = legendre_with_derivative(n, 0.0);
        weights[n / 2] = 2.0 / (d * d);
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Nodes per panel used throughout the crate.
pub const PANEL_NODES: usize = 16;

/// Integrate `f(λ)` over `[lambda_min, lambda_max]` with `panels` log-spaced
/// Gauss–Legendre panels. Panel contributions are combined in panel order.
pub fn integrate_log_panels(
    lambda_min: f64,
    lambda_max: f64,
    panels: usize,
    f: impl Fn(f64) -> f64 + Sync,
) -> f64 {
    assert!(lambda_min > 0.0 && lambda_max > lambda_min);
    assert!(panels >= 1);
    let (nodes, weights) = gauss_legendre(PANEL_NODES);
    let x_lo = lambda_min.ln();
    let x_hi = lambda_max.ln();
    let dx = (x_hi - x_lo) / panels as f64;
    parallel::map_chunk_ranges(panels, |lo, hi| {
        let mut acc = 0.0;
        for p in lo..hi {
            let a = x_lo + p as f64 * dx;
            let half = 0.5 * dx;
            let mid = a + half;
            let mut panel = 0.0;
            for (xi, wi) in nodes.iter().zip(&weights) {
                let x = mid + half * xi;
                let lam = x.exp();
                panel += wi * f(lam) * lam;
            }
            acc += panel * half;
        }
        acc
    })
    .iter()
    .sum()
}
