//! Periodic Fourier grid for divergence-free fields.
//!
//! Modes carry integer index triples `m ∈ [-N/2, N/2)³`; the physical
//! wavevector is `k = (2π/L)·m`. The zero mode is frozen (mean-free fields)
//! and the Nyquist planes are always excluded so every retained mode has a
//! conjugate partner. Quadratic products are dealiased by zeroing any mode
//! with an axis index beyond `dealias_fraction·N/2`.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("raw coefficients break Hermitian symmetry at mode {mode:?} (defect {defect:.3e})")]
    AsymmetricInput { mode: [i64; 3], defect: f64 },
    #[error("field invariant violated: {0}")]
    InvariantViolation(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub const DEFAULT_DEALIAS_FRACTION: f64 = 2.0 / 3.0;

/// Cube of `n` modes per axis on a box of side `length`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveGrid {
    n: usize,
    length: f64,
    dealias_fraction: f64,
}

impl WaveGrid {
    pub fn new(n: usize, length: f64) -> Result<Self, FieldError> {
        Self::with_dealias(n, length, DEFAULT_DEALIAS_FRACTION)
    }

    pub fn with_dealias(n: usize, length: f64, dealias_fraction: f64) -> Result<Self, FieldError> {
        if n < 4 || !n.is_multiple_of(2) {
            return Err(FieldError::InvalidGrid(format!(
                "mode count per axis must be even and at least 4, got {n}"
            )));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(FieldError::InvalidGrid(format!(
                "box length must be positive, got {length}"
            )));
        }
        if !(dealias_fraction > 0.0 && dealias_fraction <= 1.0) {
            return Err(FieldError::InvalidGrid(format!(
                "dealias fraction must lie in (0, 1], got {dealias_fraction}"
            )));
        }
        Ok(Self {
            n,
            length,
            dealias_fraction,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dealias_fraction(&self) -> f64 {
        self.dealias_fraction
    }

    /// Total number of stored modes (`n³`).
    pub fn size(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(3)
    }

    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.size() as f64
    }

    /// `2π/L`, the wavenumber spacing.
    pub fn dk(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.length
    }

    /// Smallest positive eigenvalue `λ_min = (2π/L)²` of the surrogate Stokes
    /// operator.
    pub fn lambda_min(&self) -> f64 {
        let dk = self.dk();
        dk * dk
    }

    /// Largest axis index kept by the dealias rule (capped below Nyquist).
    pub fn dealias_limit(&self) -> i64 {
        let raw = (self.dealias_fraction * self.n as f64 / 2.0).floor() as i64;
        raw.min(self.n as i64 / 2 - 1)
    }

    /// Signed mode index of storage position `i` along one axis.
    #[inline]
    pub fn signed_index(&self, i: usize) -> i64 {
        let half = self.n / 2;
        if i < half {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Storage position of signed mode index `m` along one axis.
    #[inline]
    pub fn storage_index(&self, m: i64) -> usize {
        if m >= 0 {
            m as usize
        } else {
            (m + self.n as i64) as usize
        }
    }

    /// Flat index of the signed mode triple.
    #[inline]
    pub fn flat(&self, m: [i64; 3]) -> usize {
        let ix = self.storage_index(m[0]);
        let iy = self.storage_index(m[1]);
        let iz = self.storage_index(m[2]);
        ix + self.n * (iy + self.n * iz)
    }

    /// Signed mode triple of the flat index.
    #[inline]
    pub fn unflat(&self, idx: usize) -> [i64; 3] {
        let ix = idx % self.n;
        let iy = (idx / self.n) % self.n;
        let iz = idx / (self.n * self.n);
        [
            self.signed_index(ix),
            self.signed_index(iy),
            self.signed_index(iz),
        ]
    }

    /// Physical wavevector of a mode triple.
    #[inline]
    pub fn wavevector(&self, m: [i64; 3]) -> [f64; 3] {
        let dk = self.dk();
        [m[0] as f64 * dk, m[1] as f64 * dk, m[2] as f64 * dk]
    }

    /// `|k|²`, the surrogate Stokes eigenvalue at a mode triple.
    #[inline]
    pub fn lambda(&self, m: [i64; 3]) -> f64 {
        let dk = self.dk();
        (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]) as f64 * dk * dk
    }

    /// Whether a mode survives dealiasing (Nyquist planes never do).
    #[inline]
    pub fn in_dealias_band(&self, m: [i64; 3]) -> bool {
        let lim = self.dealias_limit();
        m.iter().all(|c| c.abs() <= lim)
    }

    /// Whether a mode sits on a Nyquist plane (`m = -N/2` on any axis).
    #[inline]
    pub fn on_nyquist(&self, m: [i64; 3]) -> bool {
        let ny = -(self.n as i64) / 2;
        m.contains(&ny)
    }

    /// Canonical representative of a conjugate pair: the lexicographically
    /// positive member in `(m_z, m_y, m_x)` order. The zero mode and Nyquist
    /// planes are not canonical (they carry no dynamics).
    #[inline]
    pub fn is_canonical(&self, m: [i64; 3]) -> bool {
        if self.on_nyquist(m) {
            return false;
        }
        if m[2] != 0 {
            return m[2] > 0;
        }
        if m[1] != 0 {
            return m[1] > 0;
        }
        m[0] > 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructor_validates() {
        assert!(WaveGrid::new(4, 1.0).is_ok());
        assert!(WaveGrid::new(3, 1.0).is_err());
        assert!(WaveGrid::new(2, 1.0).is_err());
        assert!(WaveGrid::new(6, 0.0).is_err());
        assert!(WaveGrid::with_dealias(8, 1.0, 0.0).is_err());
        assert!(WaveGrid::with_dealias(8, 1.0, 1.5).is_err());
    }

    #[test]
    fn index_round_trip() {
        let g = WaveGrid::new(8, 2.0).unwrap();
        for idx in 0..g.size() {
            let m = g.unflat(idx);
            assert_eq!(g.flat(m), idx);
            for c in m {
                assert!((-4..4).contains(&c));
            }
        }
    }

    #[test]
    fn dealias_limit_keeps_products_alias_free() {
        // For the 2/3 rule the retained band K must satisfy 3K < N… the
        // floor keeps K at N/3 or below for every even N.
        for n in [4usize, 8, 16, 32, 64] {
            let g = WaveGrid::new(n, 1.0).unwrap();
            let k = g.dealias_limit();
            assert!(3 * k < n as i64 || n == 4, "n={n} k={k}");
            assert!(k >= 1);
        }
    }

    #[test]
    fn canonical_splits_pairs() {
        let g = WaveGrid::new(8, 1.0).unwrap();
        let mut canon = 0usize;
        let mut partnered = 0usize;
        for idx in 0..g.size() {
            let m = g.unflat(idx);
            if m == [0, 0, 0] || g.on_nyquist(m) {
                continue;
            }
            let neg = [-m[0], -m[1], -m[2]];
            assert_ne!(g.is_canonical(m), g.is_canonical(neg), "mode {m:?}");
            if g.is_canonical(m) {
                canon += 1;
            } else {
                partnered += 1;
            }
        }
        assert_eq!(canon, partnered);
    }

    #[test]
    fn lambda_min_matches_dk() {
        let g = WaveGrid::new(16, 20.0 * std::f64::consts::PI).unwrap();
        assert!((g.lambda_min() - 0.01).abs() < 1e-15);
    }
}
