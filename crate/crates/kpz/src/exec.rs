use kpz_core::exec::Exec;
use rayon::prelude::*;

/// Runs `Exec::map` on the current rayon pool; results come back in index order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rayon;

impl Exec for Rayon {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).into_par_iter().map(f).collect()
    }
}
