//! Exact arithmetic of the decay-exponent bootstrap.
//!
//! Starting from `γ₁ = 1/(4α)`, each step maps the current exponent through
//! an affine rule built from three candidate exponents
//!
//! ```text
//! a_n = (5/(4α) - 1)            + γ_n (2 - 3/(2α))
//! b_n = (2/(4α) + 3/(4β) - 1)   + γ_n (2 - 3/(2β))
//! c_n = (3/(8α) + 7/(8β) - 1)   + γ_n (2 - 3/(4α) - 3/(4β))
//! ```
//!
//! (`b_n` keeps the unreduced `2/(4α) = 1/(2α)` so the three coefficients
//! line up visibly). The differences factor through `(1/α - 1/β)`, which
//! fixes the ordering of the three candidates and hence the branch: the
//! smallest candidate is `c_n` when `1/α > 1/β` and `a_n` otherwise. The
//! selected affine map has slope in `(0, 1/2]`, so the iteration converges
//! geometrically to its fixed point — `(5-4α)/(6-4α)` on branch `a`,
//! `(3/(8α)+7/(8β)-1)/(3/(4α)+3/(4β)-1)` on branch `c` — which equals `1/2`
//! exactly on the boundary `α = 1` (resp. `β = 1`) and exceeds `1/2` inside.
//!
//! All of this is carried out in exact rational arithmetic ([`Rat`]); the
//! margins of the supporting inequalities are exactly zero at `α = β = 1`
//! and float noise must not flip those audits. A f64 fast path mirrors every
//! operation and is cross-checked in tests.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Rat = BigRational;

#[derive(Debug, Error)]
pub enum BootstrapError {
    #[error("hypothesis violation: {0}")]
    HypothesisViolation(String),
    #[error("precondition violation: {0}")]
    PreconditionViolation(String),
    #[error("cannot parse '{0}' as a decimal rational")]
    BadDecimal(String),
}

pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Exact rational from a plain decimal string such as `0.85` or `-3`.
pub fn rat_from_decimal(s: &str) -> Result<Rat, BootstrapError> {
    let t = s.trim();
    let (sign, body) = match t.strip_prefix('-') {
        Some(rest) => (-1i64, rest),
        None => (1, t.strip_prefix('+').unwrap_or(t)),
    };
    let mut parts = body.splitn(2, '.');
    let int_part = parts.next().unwrap_or("");
    let frac_part = parts.next().unwrap_or("");
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(BootstrapError::BadDecimal(s.into()));
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(BootstrapError::BadDecimal(s.into()));
    }
    let digits = format!("{int_part}{frac_part}");
    let num: BigInt = digits
        .parse()
        .map_err(|_| BootstrapError::BadDecimal(s.into()))?;
    let den = BigInt::from(10u32).pow(frac_part.len() as u32);
    Ok(Rat::new(BigInt::from(sign) * num, den))
}

pub fn to_f64(r: &Rat) -> f64 {
    r.to_f64().expect("rational fits in f64")
}

fn check_alpha_beta(alpha: &Rat, beta: &Rat) -> Result<(), BootstrapError> {
    let three_quarters = rat(3, 4);
    let one = Rat::one();
    for (name, v) in [("alpha", alpha), ("beta", beta)] {
        if !(*v > three_quarters && *v <= one) {
            return Err(BootstrapError::HypothesisViolation(format!(
                "{name} = {} violates 3/4 < {name} <= 1",
                to_f64(v)
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Hölder exponents
// ---------------------------------------------------------------------------

/// Conjugate exponents `1/p = 1 - 3/(4α)`, `1/q = 1 - 3/(4β)`,
/// `1/r = 1 - 3/(8α) - 3/(8β)`; all exceed 1 on the admissible range.
#[derive(Debug, Clone)]
pub struct HolderExponents {
    pub p: Rat,
    pub q: Rat,
    pub r: Rat,
}

pub fn holder_exponents(alpha: &Rat, beta: &Rat) -> Result<HolderExponents, BootstrapError> {
    if alpha <= &rat(3, 4) || beta <= &rat(3, 4) {
        return Err(BootstrapError::PreconditionViolation(
            "Hölder exponents degenerate at alpha or beta = 3/4".into(),
        ));
    }
    let one = Rat::one();
    let inv_p = &one - rat(3, 4) / alpha;
    let inv_q = &one - rat(3, 4) / beta;
    let inv_r = &one - rat(3, 8) / alpha - rat(3, 8) / beta;
    Ok(HolderExponents {
        p: one.clone() / inv_p,
        q: one.clone() / inv_q,
        r: one / inv_r,
    })
}

// ---------------------------------------------------------------------------
// Bootstrap step and ordering
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct StepValues {
    pub a: Rat,
    pub b: Rat,
    pub c: Rat,
}

pub fn bootstrap_step(
    gamma_n: &Rat,
    alpha: &Rat,
    beta: &Rat,
) -> Result<StepValues, BootstrapError> {
    if !(gamma_n > &Rat::zero() && gamma_n < &rat(1, 2)) {
        return Err(BootstrapError::PreconditionViolation(format!(
            "step exponent gamma_n = {} must lie in (0, 1/2)",
            to_f64(gamma_n)
        )));
    }
    Ok(step_values_raw(gamma_n, alpha, beta))
}

/// Raw affine evaluation of the three candidates, without the `γ_n < 1/2`
/// range check. The algebra is valid for any rational argument; the checked
/// [`bootstrap_step`] is the entry point matching the recursion's
/// hypotheses.
pub fn step_values_raw(gamma_n: &Rat, alpha: &Rat, beta: &Rat) -> StepValues {
    let one = Rat::one();
    let two = rat(2, 1);
    let a = rat(5, 4) / alpha - &one + gamma_n * (&two - rat(3, 2) / alpha);
    let b = rat(2, 4) / alpha + rat(3, 4) / beta - &one + gamma_n * (&two - rat(3, 2) / beta);
    let c = rat(3, 8) / alpha + rat(7, 8) / beta - &one
        + gamma_n * (&two - rat(3, 4) / alpha - rat(3, 4) / beta);
    StepValues { a, b, c }
}

/// Which candidate the recursion selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchRule {
    /// `1/α ≤ 1/β`: candidates order as `a ≤ b ≤ c`, take `a`.
    A,
    /// `1/α > 1/β`: candidates order as `a ≥ b ≥ c`, take `c`.
    C,
}

impl BranchRule {
    pub fn for_parameters(alpha: &Rat, beta: &Rat) -> Self {
        // 1/α - 1/β > 0  ⇔  β > α
        if beta > alpha {
            BranchRule::C
        } else {
            BranchRule::A
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BranchRule::A => "a",
            BranchRule::C => "c",
        }
    }

    fn select(self, step: &StepValues) -> Rat {
        match self {
            BranchRule::A => step.a.clone(),
            BranchRule::C => step.c.clone(),
        }
    }

    /// Affine coefficients `(offset, slope)` of the selected recursion.
    fn affine(self, alpha: &Rat, beta: &Rat) -> (Rat, Rat) {
        let one = Rat::one();
        let two = rat(2, 1);
        match self {
            BranchRule::A => (rat(5, 4) / alpha - &one, &two - rat(3, 2) / alpha),
            BranchRule::C => (
                rat(3, 8) / alpha + rat(7, 8) / beta - &one,
                &two - rat(3, 4) / alpha - rat(3, 4) / beta,
            ),
        }
    }
}

/// Difference identities between the three candidates and the resulting
/// ordering. In rational arithmetic the identity residuals are exactly zero.
#[derive(Debug, Clone)]
pub struct OrderingAudit {
    pub values: StepValues,
    /// `a-b` and its factored form `(3/4)(1/α-1/β)(1-2γ)`
    pub diff_ab: (Rat, Rat),
    /// `a-c` and its factored form `(3/4)(1/α-1/β)(7/6-γ)`
    pub diff_ac: (Rat, Rat),
    /// `b-c` and its factored form `(3/4)(1/α-1/β)(1/6+γ)`
    pub diff_bc: (Rat, Rat),
    pub identities_exact: bool,
    pub ordering_holds: bool,
    pub branch: BranchRule,
}

pub fn ordering_audit(
    gamma_n: &Rat,
    alpha: &Rat,
    beta: &Rat,
) -> Result<OrderingAudit, BootstrapError> {
    let values = bootstrap_step(gamma_n, alpha, beta)?;
    let gap = Rat::one() / alpha - Rat::one() / beta;
    let factor = rat(3, 4) * &gap;
    let diff_ab = (
        &values.a - &values.b,
        &factor * (Rat::one() - rat(2, 1) * gamma_n),
    );
    let diff_ac = (&values.a - &values.c, &factor * (rat(7, 6) - gamma_n));
    let diff_bc = (&values.b - &values.c, &factor * (rat(1, 6) + gamma_n));
    let identities_exact =
        diff_ab.0 == diff_ab.1 && diff_ac.0 == diff_ac.1 && diff_bc.0 == diff_bc.1;
    let ordering_holds = if gap.is_positive() {
        values.a >= values.b && values.b >= values.c
    } else {
        values.a <= values.b && values.b <= values.c
    };
    Ok(OrderingAudit {
        values,
        diff_ab,
        diff_ac,
        diff_bc,
        identities_exact,
        ordering_holds,
        branch: BranchRule::for_parameters(alpha, beta),
    })
}

// ---------------------------------------------------------------------------
// Closed-form limit
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitClass {
    /// Limit equals 1/2 exactly (boundary parameter).
    Boundary,
    /// Limit strictly exceeds 1/2.
    Interior,
}

/// Fixed point of the selected affine recursion: `(5-4α)/(6-4α)` on branch
/// `a`, `(3/(8α)+7/(8β)-1)/(3/(4α)+3/(4β)-1)` on branch `c`.
pub fn closed_form_limit(
    alpha: &Rat,
    beta: &Rat,
) -> Result<(Rat, BranchRule, LimitClass), BootstrapError> {
    check_alpha_beta(alpha, beta)?;
    let branch = BranchRule::for_parameters(alpha, beta);
    let (offset, slope) = branch.affine(alpha, beta);
    let limit = &offset / (Rat::one() - &slope);
    let class = if limit == rat(1, 2) {
        LimitClass::Boundary
    } else {
        LimitClass::Interior
    };
    Ok((limit, branch, class))
}

/// Explicit geometric-series form of the iterate:
/// `γ_{n+1} = K Σ_{m=0}^{n-1} R^m + γ₁ R^n`.
pub fn partial_sum_gamma(alpha: &Rat, beta: &Rat, n: usize) -> Result<Rat, BootstrapError> {
    check_alpha_beta(alpha, beta)?;
    let branch = BranchRule::for_parameters(alpha, beta);
    let (offset, slope) = branch.affine(alpha, beta);
    let gamma1 = rat(1, 4) / alpha;
    let mut geom = Rat::zero();
    let mut pow = Rat::one();
    for _ in 0..n {
        geom += &pow;
        pow *= &slope;
    }
    Ok(offset * geom + gamma1 * pow)
}

// ---------------------------------------------------------------------------
// The bootstrap run
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct BootstrapInput {
    pub alpha: Rat,
    pub beta: Rat,
    pub gamma: Rat,
    pub max_steps: usize,
}

impl BootstrapInput {
    pub fn new(
        alpha: Rat,
        beta: Rat,
        gamma: Rat,
        max_steps: usize,
    ) -> Result<Self, BootstrapError> {
        check_alpha_beta(&alpha, &beta)?;
        if !(gamma > Rat::zero() && gamma <= rat(1, 2)) {
            return Err(BootstrapError::HypothesisViolation(format!(
                "gamma = {} violates 0 < gamma <= 1/2",
                to_f64(&gamma)
            )));
        }
        if max_steps == 0 {
            return Err(BootstrapError::PreconditionViolation(
                "max_steps must be positive".into(),
            ));
        }
        Ok(Self {
            alpha,
            beta,
            gamma,
            max_steps,
        })
    }

    /// The decay theorem needs strict `γ < 1/2` when `max(α,β) = 1`.
    /// `γ = 1/2` there is still a legal bootstrap input — the run reports
    /// `NoTermination` as the documented boundary outcome.
    pub fn meets_strict_hypothesis(&self) -> bool {
        let one = Rat::one();
        let half = rat(1, 2);
        if self.alpha == one || self.beta == one {
            self.gamma < half
        } else {
            self.gamma <= half
        }
    }
}

#[derive(Debug, Clone)]
pub struct TraceStep {
    pub n: usize,
    pub gamma_n: Rat,
    pub a: Rat,
    pub b: Rat,
    pub c: Rat,
    pub branch: BranchRule,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Termination {
    /// `γ ≤ γ₁ = 1/(4α)`: nothing to do.
    ImmediateTarget,
    /// First index with `γ_{n₀+1} ≥ γ`.
    ReachedTarget { n0: usize },
    /// `max_steps` exhausted below the target (target at or above the limit).
    NoTermination,
}

#[derive(Debug, Clone)]
pub struct ExponentTrace {
    pub steps: Vec<TraceStep>,
    pub termination: Termination,
    pub branch: BranchRule,
    pub limit: Rat,
    pub limit_class: LimitClass,
    pub gamma_target: Rat,
    pub strict_hypothesis: bool,
}

impl ExponentTrace {
    /// Tabular export: `n,gamma_n,a_n,b_n,c_n,branch` rows plus a summary.
    pub fn to_table(&self) -> String {
        let mut out = String::from("n,gamma_n,a_n,b_n,c_n,branch\n");
        for s in &self.steps {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
                s.n,
                to_f64(&s.gamma_n),
                to_f64(&s.a),
                to_f64(&s.b),
                to_f64(&s.c),
                s.branch.label()
            ));
        }
        let n0 = match &self.termination {
            Termination::ImmediateTarget => "0".to_string(),
            Termination::ReachedTarget { n0 } => n0.to_string(),
            Termination::NoTermination => "none".to_string(),
        };
        out.push_str(&format!(
            "summary,limit={:.16e},branch={},n0={},strict_hypothesis={}\n",
            to_f64(&self.limit),
            self.branch.label(),
            n0,
            self.strict_hypothesis
        ));
        out
    }
}

pub fn run_bootstrap(input: &BootstrapInput) -> Result<ExponentTrace, BootstrapError> {
    let (limit, branch, limit_class) = closed_form_limit(&input.alpha, &input.beta)?;
    let gamma1 = rat(1, 4) / &input.alpha;
    let mut steps = Vec::new();
    let strict = input.meets_strict_hypothesis();
    if input.gamma <= gamma1 {
        return Ok(ExponentTrace {
            steps,
            termination: Termination::ImmediateTarget,
            branch,
            limit,
            limit_class,
            gamma_target: input.gamma.clone(),
            strict_hypothesis: strict,
        });
    }
    let mut gamma_n = gamma1;
    let mut termination = Termination::NoTermination;
    for n in 1..=input.max_steps {
        // γ_n < γ ≤ 1/2 here, so the step precondition 0 < γ_n < 1/2 holds.
        let values = step_values_raw(&gamma_n, &input.alpha, &input.beta);
        let next = branch.select(&values);
        steps.push(TraceStep {
            n,
            gamma_n: gamma_n.clone(),
            a: values.a,
            b: values.b,
            c: values.c,
            branch,
        });
        if next >= input.gamma {
            termination = Termination::ReachedTarget { n0: n };
            break;
        }
        gamma_n = next;
    }
    Ok(ExponentTrace {
        steps,
        termination,
        branch,
        limit,
        limit_class,
        gamma_target: input.gamma.clone(),
        strict_hypothesis: strict,
    })
}

// ---------------------------------------------------------------------------
// Supporting inequalities
// ---------------------------------------------------------------------------

/// Margins of the three decay-rate inequalities against `1/(4α)`:
///
/// ```text
/// (5/(4α) - 1) - 1/(4α)              = 1/α - 1
/// (1/(2α) + 3/(4β) - 1) - 1/(4α)     = 1/(4α) + 3/(4β) - 1
/// (3/(8α) + 7/(8β) - 1) - 1/(4α)     = 1/(8α) + 7/(8β) - 1
/// ```
///
/// All three are nonnegative exactly when `α, β ≤ 1`, with equality at
/// `α = β = 1`.
#[derive(Debug, Clone)]
pub struct O1Margins {
    pub margins: [Rat; 3],
    pub all_nonnegative: bool,
}

pub fn inequality_audit_o1(alpha: &Rat, beta: &Rat) -> Result<O1Margins, BootstrapError> {
    if !(alpha > &Rat::zero() && beta > &Rat::zero()) {
        return Err(BootstrapError::PreconditionViolation(
            "alpha and beta must be positive".into(),
        ));
    }
    let one = Rat::one();
    let m1 = Rat::one() / alpha - &one;
    let m2 = rat(1, 4) / alpha + rat(3, 4) / beta - &one;
    let m3 = rat(1, 8) / alpha + rat(7, 8) / beta - &one;
    let all_nonnegative = !m1.is_negative() && !m2.is_negative() && !m3.is_negative();
    Ok(O1Margins {
        margins: [m1, m2, m3],
        all_nonnegative,
    })
}

// ---------------------------------------------------------------------------
// f64 fast path
// ---------------------------------------------------------------------------

pub mod fast {
    //! Floating-point mirror of the rational engine, for hot loops and
    //! plotting. Cross-checked against the exact path in tests.

    #[derive(Debug, Clone, Copy)]
    pub struct StepValues {
        pub a: f64,
        pub b: f64,
        pub c: f64,
    }

    pub fn bootstrap_step(gamma_n: f64, alpha: f64, beta: f64) -> StepValues {
        StepValues {
            a: 5.0 / (4.0 * alpha) - 1.0 + gamma_n * (2.0 - 3.0 / (2.0 * alpha)),
            b: 2.0 / (4.0 * alpha) + 3.0 / (4.0 * beta) - 1.0
                + gamma_n * (2.0 - 3.0 / (2.0 * beta)),
            c: 3.0 / (8.0 * alpha) + 7.0 / (8.0 * beta) - 1.0
                + gamma_n * (2.0 - 3.0 / (4.0 * alpha) - 3.0 / (4.0 * beta)),
        }
    }

    pub fn closed_form_limit(alpha: f64, beta: f64) -> f64 {
        if 1.0 / alpha > 1.0 / beta {
            (3.0 / (8.0 * alpha) + 7.0 / (8.0 * beta) - 1.0)
                / (3.0 / (4.0 * alpha) + 3.0 / (4.0 * beta) - 1.0)
        } else {
            (5.0 - 4.0 * alpha) / (6.0 - 4.0 * alpha)
        }
    }

    /// Iterate the selected branch from `γ₁ = 1/(4α)` for `n` steps.
    pub fn iterate_gamma(alpha: f64, beta: f64, n: usize) -> f64 {
        let take_c = 1.0 / alpha > 1.0 / beta;
        let mut g = 1.0 / (4.0 * alpha);
        for _ in 0..n {
            let s = bootstrap_step(g, alpha, beta);
            g = if take_c { s.c } else { s.a };
        }
        g
    }
}
