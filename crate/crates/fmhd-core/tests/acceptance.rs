//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured quantities (run with `--nocapture` to see them). Tolerances
//! are pinned in the asserts.

use fmhd_core::bootstrap::{
    self, rat, rat_from_decimal, to_f64, BootstrapInput, BranchRule, LimitClass, Termination,
};
use fmhd_core::decay::{
    self, calibrated_solenoidal, log_spaced, nonlinear_decay_experiment, CalibrationTarget,
    DecayPrediction,
};
use fmhd_core::field::{convective_term, SolenoidalField};
use fmhd_core::grid::WaveGrid;
use fmhd_core::solver::{
    picard_solve, rhs_nonlinear, run_with_ledger, MhdState, RunOptions, SolverParams,
};
use fmhd_core::spectral::{
    audit_smoothing_bounds, ContinuousMeasure, FractionalExponent, SpectralMeasure,
};

fn kappa(k: f64) -> FractionalExponent {
    FractionalExponent::new(k).unwrap()
}

/// Deterministic xorshift64* stream for audit parameter sampling.
struct Stream(u64);

impl Stream {
    fn new(seed: u64) -> Self {
        Self(seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1))
    }

    fn unit(&mut self) -> f64 {
        self.0 ^= self.0 >> 12;
        self.0 ^= self.0 << 25;
        self.0 ^= self.0 >> 27;
        (self.0.wrapping_mul(0x2545F4914F6CDD1D) >> 11) as f64 / 9007199254740992.0
    }
}

/// Criterion 1 — closed-form bootstrap limits: exactly 1/2 on the boundary
/// parameters, and the 50-step recursion lands within 1e-12 of the limit on
/// a 10×10 grid of (α, β).
#[test]
fn criterion_1_bootstrap_limits() {
    // Grid α, β ∈ {0.775, 0.8, ..., 1.0} (exact rationals).
    let grid: Vec<bootstrap::Rat> = (1..=10).map(|i| rat(3, 4) + rat(i, 40)).collect();
    let mut max_gap: f64 = 0.0;
    for alpha in &grid {
        for beta in &grid {
            let (limit, branch, class) = bootstrap::closed_form_limit(alpha, beta).unwrap();
            // Boundary cases are exactly 1/2.
            if *alpha == rat(1, 1) && branch == BranchRule::A {
                assert_eq!(limit, rat(1, 2), "limit at alpha = 1 must be exactly 1/2");
                assert_eq!(class, LimitClass::Boundary);
            }
            if *beta == rat(1, 1) && branch == BranchRule::C {
                assert_eq!(limit, rat(1, 2), "limit at beta = 1 must be exactly 1/2");
                assert_eq!(class, LimitClass::Boundary);
            }
            // Recursive partial sum at n = 50 vs the closed form.
            let g50 = bootstrap::partial_sum_gamma(alpha, beta, 50).unwrap();
            let gap = to_f64(&(&limit - &g50)).abs();
            assert!(
                gap <= 1e-12,
                "alpha={alpha} beta={beta}: |gamma_50 - limit| = {gap:.3e}"
            );
            max_gap = max_gap.max(gap);
        }
    }
    println!("criterion 1 (bootstrap limits): PASS  max |gamma_50 - limit| = {max_gap:.3e}");
}

/// Criterion 2 — ordering identities to 1e-12 absolute on 10³ random
/// admissible triples; branch selection always matches min(a, b, c).
#[test]
fn criterion_2_ordering_identities() {
    let mut s = Stream::new(2024);
    let mut max_resid: f64 = 0.0;
    for _ in 0..1000 {
        let alpha = 0.750001 + 0.249999 * s.unit();
        let beta = 0.750001 + 0.249999 * s.unit();
        let gamma = (0.499999 * s.unit()).max(1e-9);
        let v = bootstrap::fast::bootstrap_step(gamma, alpha, beta);
        let gap = 1.0 / alpha - 1.0 / beta;
        let r = [
            (v.a - v.b) - 0.75 * gap * (1.0 - 2.0 * gamma),
            (v.a - v.c) - 0.75 * gap * (7.0 / 6.0 - gamma),
            (v.b - v.c) - 0.75 * gap * (1.0 / 6.0 + gamma),
        ];
        for x in r {
            assert!(x.abs() <= 1e-12, "identity residual {x:.3e}");
            max_resid = max_resid.max(x.abs());
        }
        let min = v.a.min(v.b).min(v.c);
        let selected = if gap > 0.0 { v.c } else { v.a };
        assert!(
            (selected - min).abs() <= 1e-15 * (1.0 + min.abs()),
            "branch selection must take the smallest exponent"
        );
    }
    println!("criterion 2 (ordering identities): PASS  max residual = {max_resid:.3e}");
}

/// Criterion 3 — inequality margins: exactly 0 in rational arithmetic at
/// α = β = 1, strictly positive inside the hypothesis range.
#[test]
fn criterion_3_inequality_margins() {
    let one = rat(1, 1);
    let at_one = bootstrap::inequality_audit_o1(&one, &one).unwrap();
    for m in &at_one.margins {
        assert_eq!(
            *m,
            rat(0, 1),
            "margin at alpha = beta = 1 must be exactly 0"
        );
    }
    for a in ["0.76", "0.8", "0.9", "0.99"] {
        for b in ["0.76", "0.85", "0.95", "0.999"] {
            let margins = bootstrap::inequality_audit_o1(
                &rat_from_decimal(a).unwrap(),
                &rat_from_decimal(b).unwrap(),
            )
            .unwrap();
            for m in &margins.margins {
                assert!(
                    *m > rat(0, 1),
                    "margin must be strictly positive at alpha={a}, beta={b}"
                );
            }
        }
    }
    println!("criterion 3 (inequality margins): PASS  exact zeros at alpha=beta=1");
}

/// Criterion 4 — semigroup theorem checks over 10³ random (measure, κ, t)
/// samples with zero tolerance.
#[test]
fn criterion_4_semigroup_bounds() {
    let mut s = Stream::new(4881);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let kap = kappa(0.02 + 0.98 * s.unit());
        let t = 10f64.powf(-3.0 + 7.0 * s.unit());
        let measure = if i % 20 == 0 {
            // continuous power-law sample
            let a = -0.9 + 1.8 * s.unit();
            SpectralMeasure::Continuous(
                ContinuousMeasure::power_law(a, 1.0, 1.0, kap, t.max(1.0)).unwrap(),
            )
        } else {
            let n_atoms = 1 + (s.unit() * 24.0) as usize;
            let atoms: Vec<(f64, f64)> = (0..n_atoms)
                .map(|_| (10f64.powf(-6.0 + 12.0 * s.unit()), s.unit()))
                .collect();
            SpectralMeasure::discrete(atoms).unwrap()
        };
        let audit = audit_smoothing_bounds(&measure, kap, &[t])
            .expect("smoothing bounds are theorems; violation is a quadrature bug");
        let row = audit.rows[0];
        assert!(
            row.decay_ratio <= 1.0,
            "decay ratio {} > 1",
            row.decay_ratio
        );
        assert!(
            row.power_ratio <= 1.0,
            "power ratio {} > 1",
            row.power_ratio
        );
        worst = worst.max(row.decay_ratio).max(row.power_ratio);
    }
    println!("criterion 4 (semigroup bounds): PASS  1000 samples, max ratio = {worst:.6}");
}

/// Criterion 5 — linear algebraic decay: fitted slope equals (a+1)/(2κ)
/// within 0.01 for ρ(λ) = λ^a over t ∈ [10², 10⁴].
#[test]
fn criterion_5_linear_decay_slopes() {
    let mut lines = Vec::new();
    for &a in &[-0.5, 0.0, 0.5] {
        for &k in &[0.8, 1.0] {
            let kap = kappa(k);
            let measure = SpectralMeasure::Continuous(
                ContinuousMeasure::power_law(a, 1.0, 1.0, kap, 1e4).unwrap(),
            );
            let ts = log_spaced(1e2, 1e4, 30);
            let curve = decay::linear_decay_curve(&measure, kap, &ts).unwrap();
            assert!(curve.is_non_increasing());
            let fit = decay::fit_loglog_slope(&curve, (1e2, 1e4)).unwrap();
            let expect = (a + 1.0) / (2.0 * k);
            assert!(
                (fit.exponent - expect).abs() <= 0.01,
                "a={a} kappa={k}: fitted {:.5} vs Gamma-oracle {:.5}",
                fit.exponent,
                expect
            );
            lines.push(format!(
                "a={a} kappa={k}: {:.4}~{:.4}",
                fit.exponent, expect
            ));
        }
    }
    println!(
        "criterion 5 (linear decay slopes): PASS  {}",
        lines.join("; ")
    );
}

/// Criterion 6 — energy inequality on a nonlinear run (N = 16, T = 5,
/// dt = 1e-3) plus the mollifier uniformity sweep n ∈ {1, 4, 16, 64}.
#[test]
fn criterion_6_energy_inequality() {
    let grid = WaveGrid::new(16, 2.0 * std::f64::consts::PI).unwrap();
    let kc = grid.dealias_limit() as f64 * grid.dk();
    let u0 = SolenoidalField::random(&grid, 601, -1.0, kc);
    let b0 = SolenoidalField::random(&grid, 602, -1.0, kc);
    let u0 = u0.scaled(2.0 / u0.l2_norm());
    let b0 = b0.scaled(2.0 / b0.l2_norm());
    let initial_energy = u0.norm_sq() + b0.norm_sq();

    let params = SolverParams::new(1.0, 1.0, 4, 1e-3, 5.0).unwrap();
    let out =
        run_with_ledger(&u0, &b0, &params, &RunOptions::default()).expect("ledger audit must hold");
    assert!(out.ledger_audit.passed);
    let rows = out.ledger.rows();
    for w in rows.windows(2) {
        assert!(
            w[1].total_energy() <= w[0].total_energy() * (1.0 + 1e-12),
            "total energy rose between {} and {}",
            w[0].t,
            w[1].t
        );
    }
    // Dissipation integral accounts for the energy drop at dt = 1e-3.
    let last_row = rows.last().unwrap();
    let drop = rows[0].total_energy() - last_row.total_energy();
    assert!(
        (drop - last_row.dissipation_cum).abs() <= 0.01 * rows[0].total_energy(),
        "energy drop {drop:.6e} vs dissipation {:.6e}",
        last_row.dissipation_cum
    );
    // Mollifier sweep: ledgers uniformly bounded by the initial energy.
    for n in [1u32, 4, 16, 64] {
        let sweep_params = SolverParams::new(1.0, 1.0, n, 5e-3, 5.0).unwrap();
        let sweep =
            run_with_ledger(&u0, &b0, &sweep_params, &RunOptions::default()).expect("sweep run");
        for row in sweep.ledger.rows() {
            assert!(
                row.total_energy() <= initial_energy * (1.0 + 1e-12),
                "n={n}: ledger exceeded the initial energy at t={}",
                row.t
            );
        }
    }
    let last = rows.last().unwrap();
    println!(
        "criterion 6 (energy inequality): PASS  energy {:.4e} -> {:.4e}, dissipation {:.4e}, \
         worst ledger excess {:.3e}, sweep n in {{1,4,16,64}} bounded",
        rows[0].total_energy(),
        last.total_energy(),
        last.dissipation_cum,
        out.ledger_audit.worst_excess
    );
}

/// Criterion 7 — nonlinear cancellation identities for 100 random states at
/// N = 16, both relative to total energy, at 1e-10.
#[test]
fn criterion_7_nonlinear_cancellation() {
    let grid = WaveGrid::new(16, 2.0 * std::f64::consts::PI).unwrap();
    let kc = grid.dealias_limit() as f64 * grid.dk();
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let u = SolenoidalField::random(&grid, 7000 + seed, -1.0, kc);
        let b = SolenoidalField::random(&grid, 8000 + seed, -1.0, kc);
        let energy = u.norm_sq() + b.norm_sq();
        let exchange = convective_term(&b, &b).unwrap().inner_product(&u)
            + convective_term(&b, &u).unwrap().inner_product(&b);
        let self_advect = convective_term(&u, &u).unwrap().inner_product(&u);
        let r1 = exchange.abs() / energy;
        let r2 = self_advect.abs() / energy;
        assert!(r1 <= 1e-10, "exchange identity broke: {r1:.3e}");
        assert!(r2 <= 1e-10, "skew symmetry broke: {r2:.3e}");
        worst = worst.max(r1).max(r2);
    }
    println!("criterion 7 (nonlinear cancellation): PASS  100 states, worst ratio {worst:.3e}");
}

/// Criterion 8 — Picard/Duhamel cross-validation at N = 8, T = 0.1: factors
/// below 1 after iteration 2, fixed point within the truncation budget of
/// the time-stepped solution.
#[test]
fn criterion_8_picard_cross_validation() {
    let grid = WaveGrid::new(8, 2.0 * std::f64::consts::PI).unwrap();
    let kc = grid.dealias_limit() as f64 * grid.dk();
    let u0 = SolenoidalField::random(&grid, 81, -1.0, kc).scaled(0.02);
    let b0 = SolenoidalField::random(&grid, 82, -1.0, kc).scaled(0.02);
    let t_end = 0.1;
    let params = SolverParams::new(1.0, 1.0, 4, 1e-3, t_end)
        .unwrap()
        .with_picard(1e-12, 50, 25)
        .unwrap();
    let picard = picard_solve(&u0, &b0, &params).expect("contraction at small data");
    assert!(picard.converged);
    for (i, it) in picard.iterations.iter().enumerate().skip(2) {
        if let Some(f) = it.factor {
            assert!(f < 1.0, "factor {f} at iteration {i} is not contracting");
        }
    }
    let stepped = run_with_ledger(&u0, &b0, &params, &RunOptions::default()).unwrap();
    let mut du = picard.state.u.clone();
    du.add_scaled(-1.0, &stepped.final_state.u);
    let mut db = picard.state.b.clone();
    db.add_scaled(-1.0, &stepped.final_state.b);
    let diff = (du.norm_sq() + db.norm_sq()).sqrt();
    let budget =
        (params.dt + t_end / params.duhamel_substeps as f64) * (u0.norm_sq() + b0.norm_sq()).sqrt();
    assert!(
        diff <= budget,
        "cross-method difference {diff:.3e} exceeds truncation budget {budget:.3e}"
    );
    let factors: Vec<String> = picard
        .iterations
        .iter()
        .filter_map(|i| i.factor)
        .map(|f| format!("{f:.3}"))
        .collect();
    println!(
        "criterion 8 (Picard cross-validation): PASS  factors [{}], diff {:.3e} <= budget {:.3e}",
        factors.join(", "),
        diff,
        budget
    );
}

/// Criterion 9 — nonlinear decay slope on the large box (N = 32,
/// λ_min = 0.01): fitted slope within 0.05 of 0.25 over the declared window,
/// linear control within 0.01.
#[test]
fn criterion_9_nonlinear_decay_slope() {
    let grid = WaveGrid::new(32, 20.0 * std::f64::consts::PI).unwrap();
    assert!(grid.lambda_min() <= 0.1);
    let mollifier = 256u32;
    let target = CalibrationTarget {
        gamma: 0.25,
        kappa: 1.0,
        window: (1.0, 10.0),
        mollifier_index: Some(mollifier),
    };
    let u0 = calibrated_solenoidal(&grid, 901, &target, 1.05, 100.0).unwrap();
    let b0 = calibrated_solenoidal(&grid, 902, &target, 1.05, 100.0).unwrap();
    let params = SolverParams::new(1.0, 1.0, mollifier, 0.04, 10.0).unwrap();
    let report =
        nonlinear_decay_experiment(&u0, &b0, &params, &DecayPrediction { gamma: 0.25 }, 1.0)
            .expect("window is admissible on this box");

    assert!(
        (report.window.1 - 10.0).abs() < 1e-9,
        "t_cut = 0.1/lambda_min"
    );
    assert_eq!(report.expected, 0.25, "min(gamma, 1/(4 alpha)) = 0.25");
    assert!(
        (report.control.exponent - 0.25).abs() <= 0.01,
        "linear control slope {:.4} missed 0.25 +- 0.01",
        report.control.exponent
    );
    assert!(
        (report.fitted.exponent - 0.25).abs() <= 0.05,
        "nonlinear slope {:.4} missed 0.25 +- 0.05",
        report.fitted.exponent
    );
    assert!(report.pass, "report must self-assess as pass");
    println!(
        "criterion 9 (nonlinear decay slope): PASS  fitted {:.4}, control {:.4}, window \
         [{}, {:.2}] ({})",
        report.fitted.exponent,
        report.control.exponent,
        report.window.0,
        report.window.1,
        report.caveat
    );
}

/// Companion check: the two views of the trajectory norm (ledger rows vs
/// snapshots) produce the same fit.
#[test]
fn ledger_and_snapshot_fits_agree() {
    let grid = WaveGrid::new(16, 20.0 * std::f64::consts::PI).unwrap();
    let target = CalibrationTarget {
        gamma: 0.25,
        kappa: 1.0,
        window: (1.0, 10.0),
        mollifier_index: Some(64),
    };
    let u0 = calibrated_solenoidal(&grid, 31, &target, 0.5, 1.0).unwrap();
    let b0 = calibrated_solenoidal(&grid, 32, &target, 0.5, 1.0).unwrap();
    let params = SolverParams::new(1.0, 1.0, 64, 0.05, 10.0).unwrap();
    let ts = log_spaced(1.0, 10.0, 15);
    let options = RunOptions {
        record_stride: 1,
        snapshot_times: ts.clone(),
        slack_constant: None,
    };
    let out = run_with_ledger(&u0, &b0, &params, &options).unwrap();
    let snap_curve =
        decay::DecayCurve::new(out.snapshots.iter().map(|s| (s.t, s.pair_norm)).collect()).unwrap();
    let ledger_curve = decay::DecayCurve::new(
        out.ledger
            .rows()
            .iter()
            .filter(|r| out.snapshots.iter().any(|s| (s.t - r.t).abs() < 1e-12))
            .map(|r| (r.t, r.total_energy().sqrt()))
            .collect(),
    )
    .unwrap();
    let f1 = decay::fit_loglog_slope(&snap_curve, (1.0, 10.0)).unwrap();
    let f2 = decay::fit_loglog_slope(&ledger_curve, (1.0, 10.0)).unwrap();
    assert!(
        (f1.exponent - f2.exponent).abs() <= 1e-6,
        "two views of the same data disagree: {} vs {}",
        f1.exponent,
        f2.exponent
    );
    println!(
        "ledger/snapshot consistency: PASS  slopes agree to {:.1e}",
        (f1.exponent - f2.exponent).abs()
    );
}

/// Companion check: the u = B manifold and the linear-regime control of the
/// decay experiment (tiny amplitude → nonlinear slope equals linear slope).
#[test]
fn small_amplitude_limit_matches_linear_control() {
    let grid = WaveGrid::new(16, 20.0 * std::f64::consts::PI).unwrap();
    let target = CalibrationTarget {
        gamma: 0.25,
        kappa: 1.0,
        window: (1.0, 10.0),
        mollifier_index: Some(64),
    };
    let u0 = calibrated_solenoidal(&grid, 55, &target, 0.5, 1e-4).unwrap();
    let b0 = SolenoidalField::zero(&grid);
    let params = SolverParams::new(1.0, 1.0, 64, 0.05, 10.0).unwrap();
    let report =
        nonlinear_decay_experiment(&u0, &b0, &params, &DecayPrediction { gamma: 0.25 }, 1.0)
            .unwrap();
    assert!(
        (report.fitted.exponent - report.control.exponent).abs() <= 0.01,
        "tiny-amplitude nonlinear slope {:.4} vs linear control {:.4}",
        report.fitted.exponent,
        report.control.exponent
    );
    println!(
        "linear-regime control: PASS  nonlinear {:.4} vs control {:.4}",
        report.fitted.exponent, report.control.exponent
    );
}

/// Companion check: run_bootstrap across the acceptance grid agrees with the
/// closed-form limit classification (finite n₀ exactly when the target lies
/// below or at the reachable side of the limit).
#[test]
fn bootstrap_termination_matches_limit() {
    for (a, b, g, expect_finite) in [
        ("1", "1", "0.49", true),
        ("1", "1", "0.5", false),
        ("0.8", "0.8", "0.5", true),
        ("0.8", "1", "0.45", true),
    ] {
        let input = BootstrapInput::new(
            rat_from_decimal(a).unwrap(),
            rat_from_decimal(b).unwrap(),
            rat_from_decimal(g).unwrap(),
            500,
        )
        .unwrap();
        let trace = bootstrap::run_bootstrap(&input).unwrap();
        let finite = matches!(
            trace.termination,
            Termination::ReachedTarget { .. } | Termination::ImmediateTarget
        );
        assert_eq!(
            finite, expect_finite,
            "alpha={a} beta={b} gamma={g}: termination {:?}",
            trace.termination
        );
    }
    println!("bootstrap termination classification: PASS");
}
