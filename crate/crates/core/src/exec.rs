//! Scenario-parallel map. Results always come back in index order, so the
//! reduce that follows is independent of the thread count.

/// Worker cap from `ADEQSIM_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("ADEQSIM_THREADS").ok()?.trim().parse().ok().filter(|&n: &usize| n > 0)
}

/// Applies `f` to `0..n`. With the `parallel` feature the calls are spread
/// over `threads` workers (all cores when `None`); `Some(1)` and builds
/// without the feature run sequentially.
pub fn par_map<R, F>(n: usize, threads: Option<usize>, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        match threads {
            Some(1) => {}
            None => return (0..n).into_par_iter().map(&f).collect(),
            Some(k) => {
                if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(k).build() {
                    return pool.install(|| (0..n).into_par_iter().map(&f).collect());
                }
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    (0..n).map(f).collect()
}
