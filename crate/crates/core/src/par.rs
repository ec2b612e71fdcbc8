//! Data-parallel helpers with a sequential fallback.
//!
//! All reductions use a fixed chunk decomposition that does not depend on the
//! thread count, so sequential and parallel execution produce bit-identical
//! results. Without the `parallel` feature every path runs sequentially.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Number of entries per work item. Fixed so that reductions are reproducible.
pub const CHUNK: usize = 4096;

/// Below this length, parallel dispatch is skipped (results are unchanged).
const PAR_THRESHOLD: usize = 4 * CHUNK;

/// How data-parallel loops are executed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    #[inline]
    fn use_threads(self, len: usize) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel && len >= PAR_THRESHOLD
    }
}

/// Calls `f(offset, chunk)` on consecutive `CHUNK`-sized pieces of `out`.
pub fn for_each_chunk_mut<F>(out: &mut [f64], exec: Execution, f: F)
where
    F: Fn(usize, &mut [f64]) + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if exec.use_threads(out.len()) {
        out.par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(c, chunk)| f(c * CHUNK, chunk));
        return;
    }
    let _ = exec;
    out.chunks_mut(CHUNK)
        .enumerate()
        .for_each(|(c, chunk)| f(c * CHUNK, chunk));
}

/// Sums `f(range)` over the fixed chunk decomposition of `0..len`, adding the
/// partial sums in chunk order.
pub fn chunked_sum<F>(len: usize, exec: Execution, f: F) -> f64
where
    F: Fn(Range<usize>) -> f64 + Send + Sync,
{
    let chunks = len.div_ceil(CHUNK);
    let range = |c: usize| c * CHUNK..((c + 1) * CHUNK).min(len);
    #[cfg(feature = "parallel")]
    if exec.use_threads(len) {
        let partial: Vec<f64> = (0..chunks).into_par_iter().map(|c| f(range(c))).collect();
        return partial.iter().sum();
    }
    let _ = exec;
    (0..chunks).map(|c| f(range(c))).sum()
}

/// Deterministic sum of a slice.
pub fn sum(x: &[f64], exec: Execution) -> f64 {
    chunked_sum(x.len(), exec, |r| x[r].iter().sum())
}

/// Deterministic 1-norm of a slice.
pub fn norm1(x: &[f64], exec: Execution) -> f64 {
    chunked_sum(x.len(), exec, |r| x[r].iter().map(|v| v.abs()).sum())
}

/// Maps `f` over `0..len` in order, possibly in parallel.
pub fn map_indices<T, F>(len: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel && len > 1 {
        return (0..len).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..len).map(f).collect()
}
