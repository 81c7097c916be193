//! Data-parallel map over independent work items, with a sequential
//! fallback when the `parallel` feature is disabled or `threads == 1`.
//!
//! Work items must be pure functions of their index (per-item seeds are
//! derived, never shared), so the output is identical under any schedule.

/// Thread budget for parallel sections.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threads {
    /// Use the default rayon pool (all available cores).
    Auto,
    /// Exactly `n` worker threads; `Fixed(1)` runs the sequential path.
    Fixed(usize),
}

impl Threads {
    pub fn from_count(n: usize) -> Self {
        if n == 0 {
            Threads::Auto
        } else {
            Threads::Fixed(n)
        }
    }

    fn is_sequential(self) -> bool {
        matches!(self, Threads::Fixed(1))
    }
}

impl Default for Threads {
    fn default() -> Self {
        Threads::Auto
    }
}

/// Map `f` over `0..n`, collecting results in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, threads: Threads, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if threads.is_sequential() {
        return (0..n).map(f).collect();
    }
    use rayon::prelude::*;
    match threads {
        Threads::Auto => (0..n).into_par_iter().map(f).collect(),
        Threads::Fixed(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .expect("building rayon pool");
            pool.install(|| (0..n).into_par_iter().map(f).collect())
        }
    }
}

/// Sequential fallback: identical results, one thread.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, _threads: Threads, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_index_order() {
        let out = map_indexed(100, Threads::Auto, |i| i * i);
        assert_eq!(out, (0..100).map(|i| i * i).collect::<Vec<_>>());
    }

    #[test]
    fn sequential_matches_parallel() {
        let seq = map_indexed(50, Threads::Fixed(1), |i| (i as f64).sin());
        let par = map_indexed(50, Threads::Auto, |i| (i as f64).sin());
        assert_eq!(seq, par);
    }
}
