//! Execution policy for the per-pixel loops.
//!
//! With the `parallel` feature (default) [`Exec::Parallel`] runs on the
//! rayon global pool. Without it both policies run sequentially. Outputs are
//! collected in index order and every reduction is summed sequentially, so
//! results are bit-identical between the two policies.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

/// Evaluates `f` at `0..n` and collects the results in index order.
pub fn map_indexed<R, F>(exec: Exec, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

/// Sorts with a total order. The comparator must never return `Equal` for
/// distinct elements, which makes the result independent of the policy.
pub fn sort_by<T, F>(exec: Exec, v: &mut [T], cmp: F)
where
    T: Send,
    F: Fn(&T, &T) -> std::cmp::Ordering + Sync,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => v.par_sort_unstable_by(cmp),
        _ => v.sort_unstable_by(cmp),
    }
}
