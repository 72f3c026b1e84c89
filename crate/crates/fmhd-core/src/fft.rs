//! Three-dimensional complex FFT assembled from cached 1-D rustfft plans.
//!
//! Convention: `forward` is the analysis transform with the `1/n³`
//! normalization, so coefficients satisfy `f(x_g) = Σ_m û(m) e^{i k_m·x_g}`
//! and `inverse` is the plain synthesis sum. Lines along each axis are
//! independent, so they are dispatched through [`crate::parallel`] in fixed
//! batches; results do not depend on the execution policy.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::parallel;

pub struct Fft3 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

/// Plan cache keyed by line length. Plans are immutable and shareable.
fn plan_cache() -> &'static Mutex<HashMap<usize, Arc<Fft3>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Fft3>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

pub fn planner(n: usize) -> Arc<Fft3> {
    let mut cache = plan_cache().lock().expect("fft plan cache poisoned");
    cache
        .entry(n)
        .or_insert_with(|| Arc::new(Fft3::new(n)))
        .clone()
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Analysis transform: physical samples → coefficients (`1/n³` applied).
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, true);
        let scale = 1.0 / (self.n * self.n * self.n) as f64;
        parallel::for_each_chunk_mut(data, parallel::CHUNK, |_, chunk| {
            for v in chunk {
                *v *= scale;
            }
        });
    }

    /// Synthesis transform: coefficients → physical samples.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    fn transform(&self, data: &mut [Complex64], forward: bool) {
        let n = self.n;
        let n2 = n * n;
        assert_eq!(data.len(), n2 * n, "buffer is not n³");
        let plan = if forward { &self.fwd } else { &self.inv };

        let process_contiguous = |buf: &mut [Complex64]| {
            // Batch lines so each task reuses one scratch buffer.
            parallel::for_each_chunk_mut(buf, n * 16, |_, chunk| {
                let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
                for line in chunk.chunks_mut(n) {
                    plan.process_with_scratch(line, &mut scratch);
                }
            });
        };

        // Axis x: lines already contiguous.
        process_contiguous(data);

        // Axis y: lines of stride n live inside one z-plane; planes are
        // disjoint chunks of n² elements.
        parallel::for_each_chunk_mut(data, n2, |_, plane| {
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            let mut line = vec![Complex64::default(); n];
            for ix in 0..n {
                for (iy, v) in line.iter_mut().enumerate() {
                    *v = plane[ix + n * iy];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for (iy, v) in line.iter().enumerate() {
                    plane[ix + n * iy] = *v;
                }
            }
        });

        // Axis z: transpose x↔z so the lines become contiguous, process,
        // transpose back.
        let mut buf = vec![Complex64::default(); data.len()];
        {
            let src: &[Complex64] = data;
            parallel::fill_indexed(&mut buf, |j| {
                let iz = j % n;
                let iy = (j / n) % n;
                let ix = j / n2;
                src[ix + n * (iy + n * iz)]
            });
        }
        process_contiguous(&mut buf);
        {
            let src: &[Complex64] = &buf;
            parallel::fill_indexed(data, |i| {
                let ix = i % n;
                let iy = (i / n) % n;
                let iz = i / n2;
                src[iz + n * (iy + n * ix)]
            });
        }
    }
}
