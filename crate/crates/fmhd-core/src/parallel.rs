//! Execution-policy helpers.
//!
//! Every data-parallel loop in the crate goes through one of these functions.
//! Reductions are chunked with a fixed chunk length and the partial results
//! are combined in index order, so the floating-point result is bitwise
//! identical whether the chunks run on the rayon pool or inline. This is what
//! makes run artifacts reproducible across `--jobs` settings and across the
//! `parallel` feature flag.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
#[cfg(feature = "parallel")]
use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
static PARALLEL: AtomicBool = AtomicBool::new(true);

/// Runtime switch for the rayon path. Compiled out when the `parallel`
/// feature is disabled. Benchmarks use this to compare both paths in one
/// process; `set_parallel(false)` forces the sequential fallback.
#[cfg(feature = "parallel")]
pub fn set_parallel(enabled: bool) {
    PARALLEL.store(enabled, Ordering::Relaxed);
}

/// Whether work is currently dispatched to the rayon pool.
pub fn parallel_enabled() -> bool {
    #[cfg(feature = "parallel")]
    {
        PARALLEL.load(Ordering::Relaxed)
    }
    #[cfg(not(feature = "parallel"))]
    {
        false
    }
}

/// Fixed chunk length for reductions. Not tunable: changing it changes the
/// rounding of chunked sums.
pub(crate) const CHUNK: usize = 4096;

/// Map `f` over the chunk ranges `[lo, hi)` covering `0..len` and collect the
/// results in chunk order.
pub(crate) fn map_chunk_ranges<T: Send>(
    len: usize,
    f: impl Fn(usize, usize) -> T + Sync,
) -> Vec<T> {
    let n_chunks = len.div_ceil(CHUNK).max(1);
    let eval = |c: usize| {
        let lo = c * CHUNK;
        f(lo, (lo + CHUNK).min(len))
    };
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        return (0..n_chunks).into_par_iter().map(eval).collect();
    }
    (0..n_chunks).map(eval).collect()
}

/// Deterministic sum of `f(i)` for `i` in `0..len`.
pub(crate) fn sum_indexed(len: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    map_chunk_ranges(len, |lo, hi| (lo..hi).map(&f).sum::<f64>())
        .iter()
        .sum()
}

/// Apply `f(chunk_index, chunk)` to disjoint chunks of `chunk_len` elements.
pub(crate) fn for_each_chunk_mut<T: Send>(
    data: &mut [T],
    chunk_len: usize,
    f: impl Fn(usize, &mut [T]) + Sync,
) {
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        data.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    data.chunks_mut(chunk_len)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}

/// Fill `out[i] = f(i)` for every index.
pub(crate) fn fill_indexed<T: Send>(out: &mut [T], f: impl Fn(usize) -> T + Sync) {
    let len = out.len();
    let _ = len;
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        out.par_iter_mut().enumerate().for_each(|(i, v)| *v = f(i));
        return;
    }
    out.iter_mut().enumerate().for_each(|(i, v)| *v = f(i));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_sum_matches_sequential_order() {
        let vals: Vec<f64> = (0..20_000)
            .map(|i| ((i * 37) % 101) as f64 * 1e-3)
            .collect();
        let by_helper = sum_indexed(vals.len(), |i| vals[i]);
        // Reference: same chunking, forced sequential.
        let mut expect = 0.0;
        for c in vals.chunks(CHUNK) {
            expect += c.iter().sum::<f64>();
        }
        assert_eq!(by_helper, expect);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_and_sequential_paths_are_bitwise_equal() {
        let vals: Vec<f64> = (0..50_000)
            .map(|i| (i as f64 * 0.618_033).sin() * 1e3)
            .collect();
        set_parallel(true);
        let par = sum_indexed(vals.len(), |i| vals[i]);
        set_parallel(false);
        let seq = sum_indexed(vals.len(), |i| vals[i]);
        set_parallel(true);
        assert_eq!(par.to_bits(), seq.to_bits());
    }
}
