//! Execution helpers: data-parallel map with a sequential fallback.
//!
//! Hot loops in this crate are expressed as independent per-item maps that
//! collect into a `Vec` in input order, so the parallel and sequential
//! drivers produce bit-identical results. The `parallel` feature (default)
//! routes `map_collect` through rayon; without it the sequential driver is
//! used. `map_collect_seq` is always available so benchmarks can compare
//! the two on the same build.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..n` and collect results in index order.
#[cfg(feature = "parallel")]
pub fn map_collect<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Map `f` over `0..n` and collect results in index order.
#[cfg(not(feature = "parallel"))]
pub fn map_collect<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    map_collect_seq(n, f)
}

/// Sequential driver with the same contract as [`map_collect`].
#[cfg_attr(feature = "parallel", allow(dead_code))]
pub fn map_collect_seq<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drivers_agree() {
        let f = |i: usize| (i as f64).sqrt() * 3.0 - 1.0;
        assert_eq!(map_collect(100, f), map_collect_seq(100, f));
    }
}
