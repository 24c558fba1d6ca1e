//! Parallel/sequential execution helpers.
//!
//! Every data-parallel loop in the crate goes through this module. With the
//! `parallel` feature (default) the work runs on the rayon global pool; the
//! sequential variants are always compiled so benches can compare both and so
//! `--no-default-features` builds keep working. All helpers preserve element
//! order, so outputs do not depend on thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use serde::{Deserialize, Serialize};

/// Which execution path to take for an operation that supports both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    /// Parallel when the `parallel` feature is enabled, sequential otherwise.
    #[default]
    Auto,
    /// Force the sequential path.
    Sequential,
}

/// Map `0..n` and collect results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sequential twin of [`map_indexed`].
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Apply `f` to equally sized mutable chunks of `data`; `f` receives the
/// chunk start offset and the chunk. Used for grid-sized array fills.
pub fn for_chunks_mut<T, F>(mode: ExecMode, data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync,
{
    debug_assert!(chunk > 0);
    match mode {
        ExecMode::Sequential => {
            for (i, c) in data.chunks_mut(chunk).enumerate() {
                f(i * chunk, c);
            }
        }
        ExecMode::Auto => {
            #[cfg(feature = "parallel")]
            {
                data.par_chunks_mut(chunk)
                    .enumerate()
                    .for_each(|(i, c)| f(i * chunk, c));
            }
            #[cfg(not(feature = "parallel"))]
            {
                for (i, c) in data.chunks_mut(chunk).enumerate() {
                    f(i * chunk, c);
                }
            }
        }
    }
}

/// Fold equally sized immutable chunks of `data` with `f` and reduce the
/// per-chunk results with `r`. `r` must be associative and exact (e.g. `max`)
/// for thread-count independence.
pub fn fold_chunks<T, A, F, R>(mode: ExecMode, data: &[T], chunk: usize, init: A, f: F, r: R) -> A
where
    T: Sync,
    A: Send + Sync + Copy,
    F: Fn(usize, &[T]) -> A + Sync + Send,
    R: Fn(A, A) -> A + Sync + Send,
{
    debug_assert!(chunk > 0);
    match mode {
        ExecMode::Sequential => data
            .chunks(chunk)
            .enumerate()
            .map(|(i, c)| f(i * chunk, c))
            .fold(init, &r),
        ExecMode::Auto => {
            #[cfg(feature = "parallel")]
            {
                data.par_chunks(chunk)
                    .enumerate()
                    .map(|(i, c)| f(i * chunk, c))
                    .reduce(|| init, &r)
            }
            #[cfg(not(feature = "parallel"))]
            {
                data.chunks(chunk)
                    .enumerate()
                    .map(|(i, c)| f(i * chunk, c))
                    .fold(init, &r)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_indexed_preserves_order() {
        let v = map_indexed(100, |i| i * 2);
        assert_eq!(v, (0..100).map(|i| i * 2).collect::<Vec<_>>());
        assert_eq!(v, map_indexed_seq(100, |i| i * 2));
    }

    #[test]
    fn fold_chunks_max_matches_sequential() {
        let data: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 997) as f64).collect();
        let m = |mode| {
            fold_chunks(
                mode,
                &data,
                64,
                f64::NEG_INFINITY,
                |_, c| c.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                f64::max,
            )
        };
        assert_eq!(m(ExecMode::Auto), m(ExecMode::Sequential));
        assert_eq!(m(ExecMode::Auto), 996.0);
    }

    #[test]
    fn for_chunks_mut_covers_all() {
        let mut data = vec![0usize; 130];
        for_chunks_mut(ExecMode::Auto, &mut data, 32, |start, c| {
            for (k, v) in c.iter_mut().enumerate() {
                *v = start + k;
            }
        });
        assert!(data.iter().enumerate().all(|(i, &v)| v == i));
    }
}
