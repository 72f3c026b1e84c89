//! Functional calculus for a positive self-adjoint operator given by its
//! spectral measure.
//!
//! An element `w` is represented by the measure `dμ(λ) = d‖E_λ w‖²`, either a
//! finite list of atoms `(λ_j, w_j)` or a density `ρ(λ)` on `(0, Λ]` with a
//! quadrature rule. Every norm of interest is an integral of a squared scalar
//! multiplier against `dμ`:
//!
//! ```text
//! ‖m(A) w‖² = ∫ m(λ)² dμ(λ),   m(λ) = λ^κ, e^{-tλ^κ}, n/(n+λ), ...
//! ```
//!
//! [`audit_smoothing_bounds`] checks the semigroup estimates
//! `‖e^{-tA^κ}w‖ ≤ ‖w‖`, `‖A^κ e^{-tA^κ}w‖ ≤ t^{-1}‖w‖` and
//! `‖A^{1/2} e^{-tA^κ}w‖ ≤ C(κ) t^{-1/(2κ)}‖w‖` with the sharp per-mode
//! constant `C(κ)`. These are theorems for any positive measure, so a
//! violation signals a quadrature defect, not a tolerance issue.

use crate::parallel;
use crate::quad;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("fractional exponent must lie in (0, 1], got {0}")]
    InvalidExponent(f64),
    #[error("spectral argument must be positive, got lambda = {0}")]
    NonpositiveLambda(f64),
    #[error("semigroup time must be nonnegative, got t = {0}")]
    NegativeTime(f64),
    #[error("mollifier index must be at least 1")]
    ZeroMollifierIndex,
    #[error("invalid spectral measure: {0}")]
    InvalidMeasure(String),
    #[error(
        "quadrature did not converge: panel doubling moved the integral by {delta:.3e} \
         (tolerance {tol:.3e})"
    )]
    QuadratureNonConvergence { delta: f64, tol: f64 },
    #[error("smoothing bound '{bound}' violated at t = {t}: ratio {ratio}")]
    SmoothingBoundViolated {
        bound: &'static str,
        t: f64,
        ratio: f64,
    },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Exponent `κ` of a fractional operator power, restricted to `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalExponent(f64);

impl FractionalExponent {
    pub fn new(kappa: f64) -> Result<Self, SpectralError> {
        if kappa.is_finite() && kappa > 0.0 && kappa <= 1.0 {
            Ok(Self(kappa))
        } else {
            Err(SpectralError::InvalidExponent(kappa))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// `λ^κ`, evaluated as `exp(κ ln λ)` so extreme `λ` cannot overflow
/// intermediate products.
pub fn fractional_power_multiplier(
    kappa: FractionalExponent,
    lambda: f64,
) -> Result<f64, SpectralError> {
    if !(lambda > 0.0) {
        return Err(SpectralError::NonpositiveLambda(lambda));
    }
    Ok(pow_kappa(lambda, kappa.get()))
}

/// `e^{-t λ^κ}`, the analytic semigroup multiplier.
pub fn semigroup_multiplier(
    kappa: FractionalExponent,
    t: f64,
    lambda: f64,
) -> Result<f64, SpectralError> {
    if !(lambda > 0.0) {
        return Err(SpectralError::NonpositiveLambda(lambda));
    }
    if !(t >= 0.0) {
        return Err(SpectralError::NegativeTime(t));
    }
    Ok((-t * pow_kappa(lambda, kappa.get())).exp())
}

/// `n/(n+λ)`, the mollifier multiplier. Contraction for every `λ > 0` and
/// tends to the identity as `n → ∞`.
pub fn mollifier_multiplier(n: u32, lambda: f64) -> Result<f64, SpectralError> {
    if n == 0 {
        return Err(SpectralError::ZeroMollifierIndex);
    }
    if !(lambda > 0.0) {
        return Err(SpectralError::NonpositiveLambda(lambda));
    }
    let nf = n as f64;
    Ok(nf / (nf + lambda))
}

#[inline]
pub(crate) fn pow_kappa(lambda: f64, kappa: f64) -> f64 {
    if kappa == 1.0 {
        lambda
    } else {
        (kappa * lambda.ln()).exp()
    }
}

/// Spectral density on a bounded support. `PowerLaw` is `scale·λ^exponent`;
/// `Table` interpolates sampled points log-log, which reproduces power laws
/// exactly and is what the tabular loader produces.
#[derive(Debug, Clone)]
pub enum Density {
    PowerLaw { exponent: f64, scale: f64 },
    Table(Vec<(f64, f64)>),
}

impl Density {
    pub fn eval(&self, lambda: f64) -> f64 {
        match self {
            Density::PowerLaw { exponent, scale } => scale * lambda.powf(*exponent),
            Density::Table(points) => {
                let first = points.first().expect("table density has points");
                let last = points.last().expect("table density has points");
                if lambda <= first.0 {
                    return first.1;
                }
                if lambda >= last.0 {
                    return last.1;
                }
                let idx = points.partition_point(|(l, _)| *l < lambda);
                let (l0, r0) = points[idx - 1];
                let (l1, r1) = points[idx];
                if r0 > 0.0 && r1 > 0.0 {
                    let s = (lambda.ln() - l0.ln()) / (l1.ln() - l0.ln());
                    (r0.ln() + s * (r1.ln() - r0.ln())).exp()
                } else {
                    let s = (lambda - l0) / (l1 - l0);
                    r0 + s * (r1 - r0)
                }
            }
        }
    }
}

/// Continuous part of a spectral measure: density, support and quadrature
/// configuration. Evaluations run the panel rule at `panels` and `2·panels`
/// and reject the result if doubling moves it by more than `rel_tol`.
#[derive(Debug, Clone)]
pub struct ContinuousMeasure {
    pub density: Density,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub panels: usize,
    pub rel_tol: f64,
}

impl ContinuousMeasure {
    pub fn new(
        density: Density,
        lambda_min: f64,
        lambda_max: f64,
        panels: usize,
        rel_tol: f64,
    ) -> Result<Self, SpectralError> {
        if !(lambda_min > 0.0 && lambda_max > lambda_min) {
            return Err(SpectralError::InvalidMeasure(format!(
                "support ({lambda_min}, {lambda_max}] is not an interval in (0, ∞)"
            )));
        }
        if panels == 0 {
            return Err(SpectralError::InvalidMeasure(
                "zero quadrature panels".into(),
            ));
        }
        if !(rel_tol > 0.0) {
            return Err(SpectralError::InvalidMeasure(format!(
                "nonpositive quadrature tolerance {rel_tol}"
            )));
        }
        if let Density::Table(points) = &density {
            if points.len() < 2 {
                return Err(SpectralError::InvalidMeasure(
                    "table density needs at least two points".into(),
                ));
            }
            for w in points.windows(2) {
                if !(w[1].0 > w[0].0) {
                    return Err(SpectralError::InvalidMeasure(
                        "table density abscissas must be strictly increasing".into(),
                    ));
                }
            }
            if points
                .iter()
                .any(|(l, r)| !(*l > 0.0) || *r < 0.0 || !r.is_finite())
            {
                return Err(SpectralError::InvalidMeasure(
                    "table density needs positive lambda and nonnegative values".into(),
                ));
            }
        }
        Ok(Self {
            density,
            lambda_min,
            lambda_max,
            panels,
            rel_tol,
        })
    }

    /// Power-law measure `scale·λ^a` on `(λ_min, lambda_max]` with `λ_min`
    /// chosen so the omitted head mass below it stays under `10⁻¹²` of the
    /// integral `∫ e^{-2tλ^κ} ρ dλ` at the largest time of interest. The head
    /// carries relatively more of the integrand as `t` grows, so `t_max`
    /// dictates the cut.
    pub fn power_law(
        exponent: f64,
        scale: f64,
        lambda_max: f64,
        kappa: FractionalExponent,
        t_max: f64,
    ) -> Result<Self, SpectralError> {
        if !(exponent > -1.0) {
            return Err(SpectralError::InvalidMeasure(format!(
                "power-law exponent {exponent} is not integrable near 0"
            )));
        }
        if !(scale > 0.0 && lambda_max > 0.0 && t_max > 0.0) {
            return Err(SpectralError::InvalidMeasure(
                "power-law measure needs positive scale, support and horizon".into(),
            ));
        }
        let p = exponent + 1.0;
        // Lower bound for the target integral at t_max: restrict to the band
        // [λ*, 2λ*] with λ* = (2 t_max)^{-1/κ}, where e^{-2 t λ^κ} ≥ e^{-4}.
        let k = kappa.get();
        let lam_star = (2.0 * t_max).powf(-1.0 / k).min(lambda_max / 2.0);
        let band_min_density = lam_star.powf(exponent).min((2.0 * lam_star).powf(exponent));
        let integral_floor = (-4.0_f64).exp() * band_min_density * lam_star;
        // Head mass below λ_min is λ_min^p / p (unit scale); solve for λ_min.
        let lambda_min = (1e-12 * p * integral_floor)
            .powf(1.0 / p)
            .min(lam_star * 1e-3)
            .max(1e-290);
        let decades = (lambda_max / lambda_min).log10().ceil().max(1.0) as usize;
        let panels = (8 * decades).max(32);
        Self::new(
            Density::PowerLaw { exponent, scale },
            lambda_min,
            lambda_max,
            panels,
            1e-10,
        )
    }

    fn integrate_sq(
        &self,
        multiplier: &(impl Fn(f64) -> f64 + Sync),
    ) -> Result<f64, SpectralError> {
        let f = |lam: f64| {
            let m = multiplier(lam);
            m * m * self.density.eval(lam)
        };
        let coarse = quad::integrate_log_panels(self.lambda_min, self.lambda_max, self.panels, f);
        let fine = quad::integrate_log_panels(self.lambda_min, self.lambda_max, 2 * self.panels, f);
        let delta = (fine - coarse).abs();
        let scale = fine.abs().max(coarse.abs());
        if delta > self.rel_tol * scale && delta > f64::MIN_POSITIVE {
            return Err(SpectralError::QuadratureNonConvergence {
                delta,
                tol: self.rel_tol * scale,
            });
        }
        Ok(fine)
    }
}

/// Purely atomic spectral measure: pairs `(λ_j, w_j)` with `λ_j > 0` and
/// `w_j ≥ 0`. The weight is the squared coefficient mass of the represented
/// element on that eigenvalue.
#[derive(Debug, Clone, Default)]
pub struct DiscreteMeasure {
    atoms: Vec<(f64, f64)>,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self, SpectralError> {
        for &(lambda, weight) in &atoms {
            if !(lambda > 0.0) || !lambda.is_finite() {
                return Err(SpectralError::InvalidMeasure(format!(
                    "eigenvalue {lambda} is not positive"
                )));
            }
            if !(weight >= 0.0) || !weight.is_finite() {
                return Err(SpectralError::InvalidMeasure(format!(
                    "weight {weight} is not nonnegative"
                )));
            }
        }
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    fn sum_sq(&self, multiplier: &(impl Fn(f64) -> f64 + Sync)) -> f64 {
        parallel::sum_indexed(self.atoms.len(), |i| {
            let (lam, w) = self.atoms[i];
            let m = multiplier(lam);
            w * m * m
        })
    }
}

/// Spectral measure of a represented element: atoms or a density.
#[derive(Debug, Clone)]
pub enum SpectralMeasure {
    Discrete(DiscreteMeasure),
    Continuous(ContinuousMeasure),
}

impl SpectralMeasure {
    pub fn discrete(atoms: Vec<(f64, f64)>) -> Result<Self, SpectralError> {
        Ok(Self::Discrete(DiscreteMeasure::new(atoms)?))
    }

    /// `∫ multiplier(λ)² dμ(λ)`. With `multiplier ≡ 1` this is the total mass
    /// `‖w‖²`. Degenerate (zero-mass) measures are legal and give 0.
    pub fn weighted_norm_sq(
        &self,
        multiplier: impl Fn(f64) -> f64 + Sync,
    ) -> Result<f64, SpectralError> {
        match self {
            SpectralMeasure::Discrete(d) => Ok(d.sum_sq(&multiplier)),
            SpectralMeasure::Continuous(c) => c.integrate_sq(&multiplier),
        }
    }

    pub fn total_mass(&self) -> Result<f64, SpectralError> {
        self.weighted_norm_sq(|_| 1.0)
    }
}

/// Sharp constant `C(κ) = sup_{s>0} s^{1/2} e^{-s^κ}` of the gradient
/// smoothing bound, located by golden-section search. In the variable
/// `y = s^κ` the objective is `y^m e^{-y}` with `m = 1/(2κ)`, maximized at
/// `y = m`; the search brackets that point generously.
pub fn sharp_gradient_constant(kappa: FractionalExponent) -> f64 {
    let m = 1.0 / (2.0 * kappa.get());
    let h = |y: f64| {
        if y <= 0.0 {
            0.0
        } else {
            (m * y.ln() - y).exp()
        }
    };
    let (mut a, mut b) = (0.0, 20.0 * m.max(1.0));
    let inv_phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (h(c), h(d));
    for _ in 0..200 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = h(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = h(d);
        }
    }
    h(0.5 * (a + b))
}

/// One row of the smoothing audit: the three bound ratios at a given time,
/// each of which the theorems cap at 1.
#[derive(Debug, Clone, Copy)]
pub struct SmoothingRow {
    pub t: f64,
    /// `‖e^{-tA^κ}w‖ / ‖w‖`
    pub decay_ratio: f64,
    /// `t · ‖A^κ e^{-tA^κ}w‖ / ‖w‖`
    pub power_ratio: f64,
    /// `t^{1/(2κ)} ‖A^{1/2} e^{-tA^κ}w‖ / (C(κ) ‖w‖)`
    pub gradient_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct SmoothingAudit {
    pub rows: Vec<SmoothingRow>,
    pub max_decay_ratio: f64,
    pub max_power_ratio: f64,
    pub max_gradient_ratio: f64,
    pub sharp_constant: f64,
}

/// Verify the semigroup smoothing bounds on every `t` of the grid. Violation
/// is an error carrying the offending time and ratio: the bounds are
/// theorems, so exceeding 1 means the quadrature itself is broken.
pub fn audit_smoothing_bounds(
    measure: &SpectralMeasure,
    kappa: FractionalExponent,
    t_grid: &[f64],
) -> Result<SmoothingAudit, SpectralError> {
    assert!(!t_grid.is_empty(), "audit needs a nonempty time grid");
    let mass = measure.total_mass()?;
    let norm = mass.sqrt();
    let c_sharp = sharp_gradient_constant(kappa);
    let k = kappa.get();
    let mut rows = Vec::with_capacity(t_grid.len());
    let mut max = [0.0_f64; 3];
    for &t in t_grid {
        assert!(t > 0.0, "audit times must be positive");
        let row = if norm == 0.0 {
            SmoothingRow {
                t,
                decay_ratio: 0.0,
                power_ratio: 0.0,
                gradient_ratio: 0.0,
            }
        } else {
            let decay = measure
                .weighted_norm_sq(|lam| (-t * pow_kappa(lam, k)).exp())?
                .sqrt();
            let power = measure
                .weighted_norm_sq(|lam| {
                    let lk = pow_kappa(lam, k);
                    lk * (-t * lk).exp()
                })?
                .sqrt();
            let gradient = measure
                .weighted_norm_sq(|lam| lam.sqrt() * (-t * pow_kappa(lam, k)).exp())?
                .sqrt();
            SmoothingRow {
                t,
                decay_ratio: decay / norm,
                power_ratio: t * power / norm,
                gradient_ratio: t.powf(1.0 / (2.0 * k)) * gradient / (c_sharp * norm),
            }
        };
        for (slot, (name, ratio)) in [
            ("decay", row.decay_ratio),
            ("power", row.power_ratio),
            ("gradient", row.gradient_ratio),
        ]
        .iter()
        .enumerate()
        {
            if *ratio > 1.0 {
                return Err(SpectralError::SmoothingBoundViolated {
                    bound: name,
                    t,
                    ratio: *ratio,
                });
            }
            max[slot] = max[slot].max(*ratio);
        }
        rows.push(row);
    }
    Ok(SmoothingAudit {
        rows,
        max_decay_ratio: max[0],
        max_power_ratio: max[1],
        max_gradient_ratio: max[2],
        sharp_constant: c_sharp,
    })
}

// ---------------------------------------------------------------------------
// Tabular serialization
// ---------------------------------------------------------------------------

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl SpectralMeasure {
    /// Plain-text tabular form: a `kind` header, then `lambda,weight` or
    /// `lambda,density` rows. Values are written with 17 significant digits,
    /// so a round trip is exact. Power-law densities are written as sampled
    /// rows; the loader's log-log interpolation reproduces them exactly.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        match self {
            SpectralMeasure::Discrete(d) => {
                out.push_str("kind,discrete\n");
                out.push_str("lambda,weight\n");
                for (lam, w) in &d.atoms {
                    out.push_str(&format!("{},{}\n", fmt_f64(*lam), fmt_f64(*w)));
                }
            }
            SpectralMeasure::Continuous(c) => {
                out.push_str("kind,continuous\n");
                out.push_str(&format!("panels,{}\n", c.panels));
                out.push_str(&format!("rel_tol,{}\n", fmt_f64(c.rel_tol)));
                out.push_str("lambda,density\n");
                match &c.density {
                    Density::Table(points) => {
                        for (lam, r) in points {
                            out.push_str(&format!("{},{}\n", fmt_f64(*lam), fmt_f64(*r)));
                        }
                    }
                    Density::PowerLaw { .. } => {
                        let samples = 256;
                        let x0 = c.lambda_min.ln();
                        let dx = (c.lambda_max.ln() - x0) / (samples - 1) as f64;
                        for i in 0..samples {
                            let lam = if i == samples - 1 {
                                c.lambda_max
                            } else {
                                (x0 + i as f64 * dx).exp()
                            };
                            out.push_str(&format!(
                                "{},{}\n",
                                fmt_f64(lam),
                                fmt_f64(c.density.eval(lam))
                            ));
                        }
                    }
                }
            }
        }
        out
    }

    pub fn from_table(text: &str) -> Result<Self, SpectralError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (ln, header) = lines.next().ok_or_else(|| SpectralError::Parse {
            line: 1,
            msg: "empty document".into(),
        })?;
        let kind = header
            .strip_prefix("kind,")
            .ok_or_else(|| SpectralError::Parse {
                line: ln + 1,
                msg: format!("expected 'kind,<discrete|continuous>', got '{header}'"),
            })?
            .trim();
        match kind {
            "discrete" => {
                let mut atoms = Vec::new();
                let mut saw_header = false;
                for (ln, line) in lines {
                    if !saw_header {
                        if line.trim() != "lambda,weight" {
                            return Err(SpectralError::Parse {
                                line: ln + 1,
                                msg: format!(
                                    "expected column header 'lambda,weight', got '{line}'"
                                ),
                            });
                        }
                        saw_header = true;
                        continue;
                    }
                    atoms.push(parse_pair(ln, line)?);
                }
                SpectralMeasure::discrete(atoms)
            }
            "continuous" => {
                let mut panels = None;
                let mut rel_tol = None;
                let mut points = Vec::new();
                let mut in_body = false;
                for (ln, line) in lines {
                    let line = line.trim();
                    if in_body {
                        points.push(parse_pair(ln, line)?);
                    } else if let Some(v) = line.strip_prefix("panels,") {
                        panels =
                            Some(
                                v.trim()
                                    .parse::<usize>()
                                    .map_err(|e| SpectralError::Parse {
                                        line: ln + 1,
                                        msg: format!("bad panel count: {e}"),
                                    })?,
                            );
                    } else if let Some(v) = line.strip_prefix("rel_tol,") {
                        rel_tol = Some(parse_float(ln, v)?);
                    } else if line == "lambda,density" {
                        in_body = true;
                    } else {
                        return Err(SpectralError::Parse {
                            line: ln + 1,
                            msg: format!("unexpected line '{line}' in continuous header"),
                        });
                    }
                }
                if points.len() < 2 {
                    return Err(SpectralError::Parse {
                        line: 0,
                        msg: "continuous measure needs at least two density rows".into(),
                    });
                }
                let lambda_min = points.first().unwrap().0;
                let lambda_max = points.last().unwrap().0;
                let c = ContinuousMeasure::new(
                    Density::Table(points),
                    lambda_min,
                    lambda_max,
                    panels.unwrap_or(64),
                    rel_tol.unwrap_or(1e-10),
                )?;
                Ok(SpectralMeasure::Continuous(c))
            }
            other => Err(SpectralError::Parse {
                line: ln + 1,
                msg: format!("unknown measure kind '{other}'"),
            }),
        }
    }
}

fn parse_float(ln: usize, s: &str) -> Result<f64, SpectralError> {
    s.trim().parse::<f64>().map_err(|e| SpectralError::Parse {
        line: ln + 1,
        msg: format!("bad float '{s}': {e}"),
    })
}

fn parse_pair(ln: usize, line: &str) -> Result<(f64, f64), SpectralError> {
    let mut it = line.split(',');
    let a = it.next().ok_or_else(|| SpectralError::Parse {
        line: ln + 1,
        msg: "missing first column".into(),
    })?;
    let b = it.next().ok_or_else(|| SpectralError::Parse {
        line: ln + 1,
        msg: "missing second column".into(),
    })?;
    if it.next().is_some() {
        return Err(SpectralError::Parse {
            line: ln + 1,
            msg: "too many columns".into(),
        });
    }
    Ok((parse_float(ln, a)?, parse_float(ln, b)?))
}
