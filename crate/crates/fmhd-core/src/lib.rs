//! Spectral laboratory for fractional magnetohydrodynamics on a periodic box.
//!
//! The crate has four cooperating layers:
//!
//! * [`spectral`] — functional calculus for a positive self-adjoint operator
//!   presented by a spectral measure: fractional powers `λ^κ`, the mollifier
//!   `n/(n+λ)`, analytic semigroup multipliers `e^{-tλ^κ}` and quadrature of
//!   spectrally defined norms, together with audits of the smoothing bounds
//!   they satisfy.
//! * [`grid`], [`fft`], [`field`] — divergence-free periodic vector fields in
//!   Fourier coefficients: Leray projection, dealiased convective products,
//!   `L^p` and fractional Sobolev norms, deterministic random field
//!   generation.
//! * [`solver`] — the mollified approximate MHD system. Short-time solutions
//!   by Picard iteration on the Duhamel integral equations, long-time decay
//!   runs by an integrating-factor Heun scheme, both with an energy ledger
//!   that audits the dissipation inequality.
//! * [`decay`] and [`bootstrap`] — measurement of algebraic L² decay
//!   exponents against spectral quadrature predictions, and the
//!   exact-rational bootstrap recursion that upgrades a decay exponent to its
//!   closed-form limit.
//!
//! Hot loops dispatch through [`parallel`]: with the `parallel` feature
//! enabled (default) they run on the rayon pool, otherwise inline. Both paths
//! chunk reductions identically, so results are bitwise equal regardless of
//! the execution policy or thread count.

// Validation uses `!(x > 0.0)` so NaN fails alongside the wrong sign, and
// the quadrature/linear-algebra kernels keep explicitly indexed loops.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod bootstrap;
pub mod decay;
pub mod fft;
pub mod field;
pub mod grid;
pub mod parallel;
pub mod quad;
pub mod solver;
pub mod spectral;

pub use field::SolenoidalField;
pub use grid::WaveGrid;
pub use spectral::{FractionalExponent, SpectralMeasure};
