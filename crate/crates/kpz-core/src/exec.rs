//! Pluggable index-parallel map. The core only ships the sequential version;
//! the `kpz` crate provides a rayon-backed one. Callers reduce the returned
//! vector in index order, so results do not depend on the executor.

use alloc::vec::Vec;

pub trait Exec: Sync {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl Exec for Serial {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

/// Pairwise (tree) sum; the association order depends only on the length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => {
            let h = n / 2;
            pairwise_sum(&xs[..h]) + pairwise_sum(&xs[h..])
        }
    }
}
