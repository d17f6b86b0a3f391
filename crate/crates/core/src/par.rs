//! Positional parallel map with a sequential fallback.

/// Maps `f` over `0..n` and collects results in index order.
///
/// With the `parallel` feature and `parallel == true` the work is spread over
/// the rayon pool; otherwise it runs on the calling thread. Output order never
/// depends on scheduling.
pub(crate) fn map_indexed<T, F>(n: usize, parallel: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = parallel;
    (0..n).map(f).collect()
}
