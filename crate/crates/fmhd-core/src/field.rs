//! Divergence-free periodic vector fields in Fourier coefficients.
//!
//! A [`SolenoidalField`] stores the full complex coefficient cube per
//! component and maintains three invariants: `k·û(k) = 0` on every retained
//! mode, `û(-k) = conj(û(k))`, and `û(0) = 0`. Reality is enforced exactly by
//! construction: quantities are computed on the canonical half of each
//! conjugate pair and mirrored, so the symmetry survives any number of
//! nonlinear evaluations bit for bit.
//!
//! The convective product `P(u·∇v)` is evaluated pseudo-spectrally with the
//! 2/3-rule: inputs are truncated to the dealias band, multiplied on the
//! physical grid, transformed back, truncated again and Leray-projected. With
//! band-limited inputs the retained modes of the product are alias-free,
//! which is what makes the skew-symmetry identity `⟨P(u·∇v), v⟩ = 0` hold to
//! rounding instead of to discretization error.

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::fft;
use crate::grid::{FieldError, WaveGrid};
use crate::parallel;
use crate::spectral::{DiscreteMeasure, FractionalExponent};

#[derive(Debug, Clone)]
pub struct SolenoidalField {
    grid: WaveGrid,
    comps: [Vec<Complex64>; 3],
}

/// Relative tolerance for the divergence-free invariant.
pub const DIV_FREE_TOL: f64 = 1e-12;

impl SolenoidalField {
    pub fn zero(grid: &WaveGrid) -> Self {
        let size = grid.size();
        Self {
            grid: grid.clone(),
            comps: std::array::from_fn(|_| vec![Complex64::default(); size]),
        }
    }

    /// Build from coefficients that must already satisfy every invariant.
    pub fn from_components(
        grid: &WaveGrid,
        comps: [Vec<Complex64>; 3],
    ) -> Result<Self, FieldError> {
        for c in &comps {
            if c.len() != grid.size() {
                return Err(FieldError::InvalidGrid(format!(
                    "component has {} coefficients, grid stores {}",
                    c.len(),
                    grid.size()
                )));
            }
        }
        let field = Self {
            grid: grid.clone(),
            comps,
        };
        field.validate()?;
        Ok(field)
    }

    /// Leray projection of a raw coefficient cube: per mode
    /// `û ← û - k (k·û)/|k|²`. The zero mode is discarded, Nyquist planes are
    /// zeroed, and the input must be Hermitian-symmetric.
    pub fn project(grid: &WaveGrid, raw: [Vec<Complex64>; 3]) -> Result<Self, FieldError> {
        for c in &raw {
            if c.len() != grid.size() {
                return Err(FieldError::InvalidGrid(format!(
                    "component has {} coefficients, grid stores {}",
                    c.len(),
                    grid.size()
                )));
            }
        }
        check_hermitian(grid, &raw)?;
        Ok(sanitize(grid, raw, false))
    }

    pub fn grid(&self) -> &WaveGrid {
        &self.grid
    }

    pub fn component(&self, i: usize) -> &[Complex64] {
        &self.comps[i]
    }

    /// Coefficient 3-vector at a signed mode triple.
    pub fn coeff(&self, m: [i64; 3]) -> [Complex64; 3] {
        let idx = self.grid.flat(m);
        [self.comps[0][idx], self.comps[1][idx], self.comps[2][idx]]
    }

    /// Set `û(m)` and mirror `û(-m) = conj`. The caller is responsible for
    /// transversality; `validate` will catch violations.
    pub fn set_coeff_pair(&mut self, m: [i64; 3], value: [Complex64; 3]) {
        let idx = self.grid.flat(m);
        let nidx = self.grid.flat([-m[0], -m[1], -m[2]]);
        for i in 0..3 {
            self.comps[i][idx] = value[i];
            self.comps[i][nidx] = value[i].conj();
        }
    }

    /// Check all structural invariants.
    pub fn validate(&self) -> Result<(), FieldError> {
        let g = &self.grid;
        let zero_idx = g.flat([0, 0, 0]);
        for i in 0..3 {
            if self.comps[i][zero_idx] != Complex64::default() {
                return Err(FieldError::InvariantViolation("nonzero mean mode".into()));
            }
        }
        let mut max_amp: f64 = 0.0;
        for i in 0..3 {
            for v in &self.comps[i] {
                max_amp = max_amp.max(v.norm());
            }
        }
        for idx in 0..g.size() {
            let m = g.unflat(idx);
            if g.on_nyquist(m) {
                for i in 0..3 {
                    if self.comps[i][idx] != Complex64::default() {
                        return Err(FieldError::InvariantViolation(format!(
                            "nonzero Nyquist mode {m:?}"
                        )));
                    }
                }
                continue;
            }
            if m == [0, 0, 0] {
                continue;
            }
            let k = g.wavevector(m);
            let u = [self.comps[0][idx], self.comps[1][idx], self.comps[2][idx]];
            let dot = k[0] * u[0] + k[1] * u[1] + k[2] * u[2];
            let kn = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
            let un = (u[0].norm_sqr() + u[1].norm_sqr() + u[2].norm_sqr()).sqrt();
            if un > 0.0 && dot.norm() > DIV_FREE_TOL * kn * un {
                return Err(FieldError::InvariantViolation(format!(
                    "mode {m:?} has relative divergence {}",
                    dot.norm() / (kn * un)
                )));
            }
            let nidx = g.flat([-m[0], -m[1], -m[2]]);
            for i in 0..3 {
                let defect = (self.comps[i][nidx] - self.comps[i][idx].conj()).norm();
                if defect > 1e-13 * max_amp.max(f64::MIN_POSITIVE) {
                    return Err(FieldError::InvariantViolation(format!(
                        "mode {m:?} breaks reality by {defect:.3e}"
                    )));
                }
            }
        }
        Ok(())
    }

    // -- linear structure ----------------------------------------------------

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for comp in &mut out.comps {
            parallel::for_each_chunk_mut(comp, parallel::CHUNK, |_, chunk| {
                for v in chunk {
                    *v *= c;
                }
            });
        }
        out
    }

    pub fn add_scaled(&mut self, c: f64, other: &Self) {
        assert_eq!(self.grid, other.grid, "grids must match");
        for i in 0..3 {
            let src = &other.comps[i];
            let dst = &mut self.comps[i];
            parallel::for_each_chunk_mut(dst, parallel::CHUNK, |ci, chunk| {
                let base = ci * parallel::CHUNK;
                for (j, v) in chunk.iter_mut().enumerate() {
                    *v += c * src[base + j];
                }
            });
        }
    }

    pub fn sum_of(a: &Self, ca: f64, b: &Self, cb: f64) -> Self {
        let mut out = a.scaled(ca);
        out.add_scaled(cb, b);
        out
    }

    /// Multiply every mode by a real scalar function of `λ = |k|²`.
    pub fn map_modes(&self, f: impl Fn(f64) -> f64 + Sync) -> Self {
        let g = self.grid.clone();
        let mut mults = vec![0.0; g.size()];
        parallel::fill_indexed(&mut mults, |idx| {
            let t = g.unflat(idx);
            if t == [0, 0, 0] {
                0.0
            } else {
                f(g.lambda(t))
            }
        });
        self.map_modes_cached(&mults)
    }

    /// Same as [`map_modes`](Self::map_modes) with a precomputed multiplier
    /// table indexed by flat mode index.
    pub fn map_modes_cached(&self, mults: &[f64]) -> Self {
        assert_eq!(mults.len(), self.grid.size());
        let mut out = self.clone();
        for comp in &mut out.comps {
            parallel::for_each_chunk_mut(comp, parallel::CHUNK, |ci, chunk| {
                let base = ci * parallel::CHUNK;
                for (j, v) in chunk.iter_mut().enumerate() {
                    *v *= mults[base + j];
                }
            });
        }
        out
    }

    // -- norms and inner products ---------------------------------------------

    /// `⟨u, v⟩ = ∫ u·v dx`, evaluated spectrally.
    pub fn inner_product(&self, other: &Self) -> f64 {
        assert_eq!(self.grid, other.grid, "grids must match");
        let vol = self.grid.volume();
        let size = self.grid.size();
        let total = parallel::sum_indexed(size, |idx| {
            let mut acc = 0.0;
            for i in 0..3 {
                let a = self.comps[i][idx];
                let b = other.comps[i][idx];
                acc += a.re * b.re + a.im * b.im;
            }
            acc
        });
        vol * total
    }

    pub fn norm_sq(&self) -> f64 {
        let vol = self.grid.volume();
        let size = self.grid.size();
        vol * parallel::sum_indexed(size, |idx| {
            (0..3).map(|i| self.comps[i][idx].norm_sqr()).sum::<f64>()
        })
    }

    pub fn l2_norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `‖A^{κ/2} f‖² = L³ Σ |k|^{2κ} |û(k)|²` (the surrogate Stokes operator
    /// has eigenvalue `λ = |k|²` per mode).
    pub fn sobolev_sq(&self, kappa: FractionalExponent) -> f64 {
        let g = &self.grid;
        let k = kappa.get();
        let vol = g.volume();
        vol * parallel::sum_indexed(g.size(), |idx| {
            let m = g.unflat(idx);
            if m == [0, 0, 0] {
                return 0.0;
            }
            let w: f64 = (0..3).map(|i| self.comps[i][idx].norm_sqr()).sum();
            if w == 0.0 {
                0.0
            } else {
                crate::spectral::pow_kappa(g.lambda(m), k) * w
            }
        })
    }

    pub fn fractional_sobolev_norm(&self, kappa: FractionalExponent) -> f64 {
        self.sobolev_sq(kappa).sqrt()
    }

    /// `‖∇f‖_{L²}` via Parseval.
    pub fn gradient_norm(&self) -> f64 {
        self.fractional_sobolev_norm(FractionalExponent::new(1.0).unwrap())
    }

    /// Physical-grid `L^p` norm (`p = ∞` takes the grid maximum).
    pub fn lp_norm(&self, p: f64) -> f64 {
        assert!(p >= 1.0, "L^p norm needs p >= 1");
        let phys = self.to_physical();
        let size = self.grid.size();
        let amp = |g: usize| -> f64 {
            (phys[0][g].norm_sqr() + phys[1][g].norm_sqr() + phys[2][g].norm_sqr()).sqrt()
        };
        if p.is_infinite() {
            return parallel::map_chunk_ranges(size, |lo, hi| {
                (lo..hi).map(amp).fold(0.0, f64::max)
            })
            .iter()
            .fold(0.0, |a, &b| a.max(b));
        }
        let cell = self.grid.cell_volume();
        let sum = parallel::sum_indexed(size, |g| amp(g).powf(p));
        (cell * sum).powf(1.0 / p)
    }

    /// Inverse transform of each component to the physical grid.
    pub(crate) fn to_physical(&self) -> [Vec<Complex64>; 3] {
        let plan = fft::planner(self.grid.n());
        std::array::from_fn(|i| {
            let mut buf = self.comps[i].clone();
            plan.inverse(&mut buf);
            buf
        })
    }

    pub(crate) fn components(&self) -> &[Vec<Complex64>; 3] {
        &self.comps
    }

    /// `self += mults ∘ other`, with a per-flat-index real multiplier table.
    pub(crate) fn add_mapped(&mut self, mults: &[f64], other: &Self) {
        assert_eq!(self.grid, other.grid, "grids must match");
        assert_eq!(mults.len(), self.grid.size());
        for i in 0..3 {
            let src = &other.comps[i];
            parallel::for_each_chunk_mut(&mut self.comps[i], parallel::CHUNK, |ci, chunk| {
                let base = ci * parallel::CHUNK;
                for (j, v) in chunk.iter_mut().enumerate() {
                    *v += mults[base + j] * src[base + j];
                }
            });
        }
    }

    // -- spectral measure bridge -----------------------------------------------

    /// Discrete spectral measure of the field under the surrogate Stokes
    /// operator: one atom per occupied shell `|m|² = const`, with weight
    /// `L³ Σ |û|²` over the shell, so spectral quadrature reproduces the
    /// field norms exactly.
    pub fn spectral_measure(&self) -> DiscreteMeasure {
        use std::collections::BTreeMap;
        let g = &self.grid;
        let vol = g.volume();
        let mut shells: BTreeMap<u64, f64> = BTreeMap::new();
        for idx in 0..g.size() {
            let m = g.unflat(idx);
            if m == [0, 0, 0] {
                continue;
            }
            let w: f64 = (0..3).map(|i| self.comps[i][idx].norm_sqr()).sum();
            if w > 0.0 {
                let s = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]) as u64;
                *shells.entry(s).or_insert(0.0) += vol * w;
            }
        }
        let dk2 = g.dk() * g.dk();
        DiscreteMeasure::new(
            shells
                .into_iter()
                .map(|(s, w)| (s as f64 * dk2, w))
                .collect(),
        )
        .expect("shell measure is valid by construction")
    }

    // -- random fields -----------------------------------------------------------

    /// Deterministic random solenoidal field: amplitude `|û(k)| = |k|^slope`
    /// for `0 < |k| ≤ k_cutoff`, random phase and transverse orientation.
    /// The generator is ChaCha8 seeded with `seed`; mode order and draw count
    /// are fixed, so the result is identical across platforms and runs.
    pub fn random(grid: &WaveGrid, seed: u64, spectral_slope: f64, k_cutoff: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut field = Self::zero(grid);
        for idx in 0..grid.size() {
            let m = grid.unflat(idx);
            if !grid.is_canonical(m) {
                continue;
            }
            let k = grid.wavevector(m);
            let kn = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
            if kn > k_cutoff {
                continue;
            }
            let amp = kn.powf(spectral_slope);
            let v = random_transverse(&mut rng, k, amp);
            field.set_coeff_pair(m, v);
        }
        field
    }

    // -- serialization --------------------------------------------------------------

    /// Tabular snapshot: grid header, then one row per mode with a nonzero
    /// coefficient. Indices are integers, values carry 17 significant digits.
    pub fn to_table(&self) -> String {
        let g = &self.grid;
        let mut out = String::new();
        out.push_str(&format!("n,{}\n", g.n()));
        out.push_str(&format!("length,{:.16e}\n", g.length()));
        out.push_str(&format!("dealias,{:.16e}\n", g.dealias_fraction()));
        out.push_str("kx,ky,kz,re_ux,im_ux,re_uy,im_uy,re_uz,im_uz\n");
        for idx in 0..g.size() {
            let u = [self.comps[0][idx], self.comps[1][idx], self.comps[2][idx]];
            if u.iter().all(|c| *c == Complex64::default()) {
                continue;
            }
            let m = g.unflat(idx);
            out.push_str(&format!(
                "{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                m[0], m[1], m[2], u[0].re, u[0].im, u[1].re, u[1].im, u[2].re, u[2].im
            ));
        }
        out
    }

    /// Load a tabular snapshot and re-validate every invariant.
    pub fn from_table(text: &str) -> Result<Self, FieldError> {
        let mut n = None;
        let mut length = None;
        let mut dealias = None;
        let mut grid: Option<WaveGrid> = None;
        let mut comps: Option<[Vec<Complex64>; 3]> = None;
        let mut in_body = false;
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if in_body {
                let g = grid.as_ref().unwrap();
                let cols: Vec<&str> = line.split(',').collect();
                if cols.len() != 9 {
                    return Err(FieldError::Parse {
                        line: ln + 1,
                        msg: format!("expected 9 columns, got {}", cols.len()),
                    });
                }
                let mut ints = [0i64; 3];
                for (i, c) in cols[..3].iter().enumerate() {
                    ints[i] = c.parse().map_err(|e| FieldError::Parse {
                        line: ln + 1,
                        msg: format!("bad mode index '{c}': {e}"),
                    })?;
                    if ints[i] < -(g.n() as i64) / 2 || ints[i] >= g.n() as i64 / 2 {
                        return Err(FieldError::Parse {
                            line: ln + 1,
                            msg: format!("mode index {} outside grid", ints[i]),
                        });
                    }
                }
                let mut vals = [0.0f64; 6];
                for (i, c) in cols[3..].iter().enumerate() {
                    vals[i] = c.parse().map_err(|e| FieldError::Parse {
                        line: ln + 1,
                        msg: format!("bad value '{c}': {e}"),
                    })?;
                }
                let idx = g.flat(ints);
                let cs = comps.as_mut().unwrap();
                for i in 0..3 {
                    cs[i][idx] = Complex64::new(vals[2 * i], vals[2 * i + 1]);
                }
            } else if let Some(v) = line.strip_prefix("n,") {
                n = Some(v.parse::<usize>().map_err(|e| FieldError::Parse {
                    line: ln + 1,
                    msg: format!("bad n: {e}"),
                })?);
            } else if let Some(v) = line.strip_prefix("length,") {
                length = Some(v.parse::<f64>().map_err(|e| FieldError::Parse {
                    line: ln + 1,
                    msg: format!("bad length: {e}"),
                })?);
            } else if let Some(v) = line.strip_prefix("dealias,") {
                dealias = Some(v.parse::<f64>().map_err(|e| FieldError::Parse {
                    line: ln + 1,
                    msg: format!("bad dealias fraction: {e}"),
                })?);
            } else if line.starts_with("kx,") {
                let (n, length) = match (n, length) {
                    (Some(n), Some(l)) => (n, l),
                    _ => {
                        return Err(FieldError::Parse {
                            line: ln + 1,
                            msg: "body started before grid header was complete".into(),
                        })
                    }
                };
                let g = WaveGrid::with_dealias(
                    n,
                    length,
                    dealias.unwrap_or(crate::grid::DEFAULT_DEALIAS_FRACTION),
                )?;
                comps = Some(std::array::from_fn(|_| {
                    vec![Complex64::default(); g.size()]
                }));
                grid = Some(g);
                in_body = true;
            } else {
                return Err(FieldError::Parse {
                    line: ln + 1,
                    msg: format!("unexpected header line '{line}'"),
                });
            }
        }
        match (grid, comps) {
            (Some(g), Some(c)) => Self::from_components(&g, c),
            _ => Err(FieldError::Parse {
                line: 0,
                msg: "missing column header".into(),
            }),
        }
    }
}

/// Draw a complex 3-vector of magnitude `amp` transverse to `k`. Retries the
/// (measure-zero) degenerate draws; consumption stays deterministic.
fn random_transverse(rng: &mut ChaCha8Rng, k: [f64; 3], amp: f64) -> [Complex64; 3] {
    loop {
        let mut v = [Complex64::default(); 3];
        for c in &mut v {
            let re = 2.0 * unit_uniform(rng) - 1.0;
            let im = 2.0 * unit_uniform(rng) - 1.0;
            *c = Complex64::new(re, im);
        }
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        let dot = (k[0] * v[0] + k[1] * v[1] + k[2] * v[2]) / k2;
        for i in 0..3 {
            v[i] -= k[i] * dot;
        }
        let norm = (v[0].norm_sqr() + v[1].norm_sqr() + v[2].norm_sqr()).sqrt();
        if norm > 1e-6 {
            let s = amp / norm;
            return [v[0] * s, v[1] * s, v[2] * s];
        }
    }
}

/// Uniform in [0, 1) from the top 53 bits of a ChaCha8 word.
fn unit_uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
}

fn check_hermitian(grid: &WaveGrid, raw: &[Vec<Complex64>; 3]) -> Result<(), FieldError> {
    let mut max_amp: f64 = 0.0;
    for c in raw {
        for v in c {
            max_amp = max_amp.max(v.norm());
        }
    }
    if max_amp == 0.0 {
        return Ok(());
    }
    for idx in 0..grid.size() {
        let m = grid.unflat(idx);
        if !grid.is_canonical(m) {
            continue;
        }
        let nidx = grid.flat([-m[0], -m[1], -m[2]]);
        for c in raw {
            let defect = (c[nidx] - c[idx].conj()).norm();
            if defect > 1e-12 * max_amp {
                return Err(FieldError::AsymmetricInput { mode: m, defect });
            }
        }
    }
    Ok(())
}

/// Shared pipeline turning raw coefficients into a valid field: optional
/// dealias truncation, canonical Hermitian symmetrization, Leray projection,
/// zero mean and Nyquist. Mirror modes are assigned by conjugation, so
/// reality is exact by construction.
pub(crate) fn sanitize(
    grid: &WaveGrid,
    mut raw: [Vec<Complex64>; 3],
    dealias: bool,
) -> SolenoidalField {
    let size = grid.size();
    for idx in 0..size {
        let m = grid.unflat(idx);
        let kill = m == [0, 0, 0] || grid.on_nyquist(m) || (dealias && !grid.in_dealias_band(m));
        if kill {
            for c in &mut raw {
                c[idx] = Complex64::default();
            }
        }
    }
    for idx in 0..size {
        let m = grid.unflat(idx);
        if !grid.is_canonical(m) {
            continue;
        }
        let nidx = grid.flat([-m[0], -m[1], -m[2]]);
        let k = grid.wavevector(m);
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        let mut v = [Complex64::default(); 3];
        for i in 0..3 {
            v[i] = 0.5 * (raw[i][idx] + raw[i][nidx].conj());
        }
        let dot = (k[0] * v[0] + k[1] * v[1] + k[2] * v[2]) / k2;
        for i in 0..3 {
            let proj = v[i] - k[i] * dot;
            raw[i][idx] = proj;
            raw[i][nidx] = proj.conj();
        }
    }
    SolenoidalField {
        grid: grid.clone(),
        comps: raw,
    }
}

/// `∂_a f` of one spectral component, returned on the physical grid.
pub(crate) fn derivative_physical(
    grid: &WaveGrid,
    comp: &[Complex64],
    axis: usize,
) -> Vec<Complex64> {
    let plan = fft::planner(grid.n());
    let mut buf = vec![Complex64::default(); grid.size()];
    parallel::fill_indexed(&mut buf, |idx| {
        let m = grid.unflat(idx);
        let k = grid.wavevector(m)[axis];
        Complex64::new(0.0, k) * comp[idx]
    });
    plan.inverse(&mut buf);
    buf
}

/// Truncate a field copy to the dealias band.
pub(crate) fn truncated_to_band(f: &SolenoidalField) -> SolenoidalField {
    let g = f.grid().clone();
    let mut out = f.clone();
    for c in &mut out.comps {
        for idx in 0..g.size() {
            if !g.in_dealias_band(g.unflat(idx)) {
                c[idx] = Complex64::default();
            }
        }
    }
    out
}

/// `P(u·∇v)` with 2/3-rule dealiasing. Contract: `⟨P(u·∇v), v⟩ = 0` up to
/// rounding for solenoidal `u` (skew symmetry of the convective form).
pub fn convective_term(
    u: &SolenoidalField,
    v: &SolenoidalField,
) -> Result<SolenoidalField, FieldError> {
    if u.grid != v.grid {
        return Err(FieldError::GridMismatch);
    }
    let g = u.grid().clone();
    let ut = truncated_to_band(u);
    let vt = truncated_to_band(v);
    let advect = ut.to_physical();
    let size = g.size();
    let plan = fft::planner(g.n());
    let mut result: [Vec<Complex64>; 3] = std::array::from_fn(|_| vec![Complex64::default(); size]);
    for i in 0..3 {
        for (axis, adv) in advect.iter().enumerate() {
            let dv = derivative_physical(&g, &vt.comps[i], axis);
            parallel::for_each_chunk_mut(&mut result[i], parallel::CHUNK, |ci, chunk| {
                let base = ci * parallel::CHUNK;
                for (j, w) in chunk.iter_mut().enumerate() {
                    *w += adv[base + j] * dv[base + j];
                }
            });
        }
        plan.forward(&mut result[i]);
    }
    Ok(sanitize(&g, result, true))
}

/// Hölder-interpolation data for
/// `‖f‖_{L⁴} ≤ C ‖f‖_{L²}^{1-3/(4κ)} ‖A^{κ/2}f‖^{3/(4κ)}`, `κ > 3/4`.
#[derive(Debug, Clone, Copy)]
pub struct InterpolationReport {
    pub kappa: f64,
    pub l4: f64,
    pub l2: f64,
    pub sobolev: f64,
    /// `None` when the field is zero (ratio undefined, reported as a skip).
    pub ratio: Option<f64>,
}

pub fn audit_interpolation(
    f: &SolenoidalField,
    kappa: FractionalExponent,
) -> Result<InterpolationReport, FieldError> {
    let k = kappa.get();
    if k <= 0.75 {
        return Err(FieldError::InvalidParameter(format!(
            "interpolation exponent must exceed 3/4, got {k}"
        )));
    }
    let l2 = f.l2_norm();
    let l4 = f.lp_norm(4.0);
    let sob = f.fractional_sobolev_norm(kappa);
    let theta = 3.0 / (4.0 * k);
    let ratio = if l2 == 0.0 || sob == 0.0 {
        None
    } else {
        Some(l4 / (l2.powf(1.0 - theta) * sob.powf(theta)))
    };
    Ok(InterpolationReport {
        kappa: k,
        l4,
        l2,
        sobolev: sob,
        ratio,
    })
}
