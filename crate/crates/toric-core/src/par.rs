//! Data-parallel map with a sequential fallback.
//!
//! The `parallel` feature (default) pulls in rayon. Setting the environment
//! variable `TORIC_SEQUENTIAL=1` forces the sequential path at runtime, which
//! lets one benchmark binary compare both modes. Both paths preserve input
//! order, so all outputs are identical either way.

/// True when the rayon path is compiled in and not disabled by
/// `TORIC_SEQUENTIAL=1`.
pub fn parallel_enabled() -> bool {
    if !cfg!(feature = "parallel") {
        return false;
    }
    match std::env::var("TORIC_SEQUENTIAL") {
        Ok(v) => v != "1",
        Err(_) => true,
    }
}

/// Order-preserving map over a slice, parallel when enabled.
pub fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if parallel_enabled() {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
    }
    items.iter().map(f).collect()
}

/// Order-preserving indexed map over 0..n, parallel when enabled.
pub fn par_map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if parallel_enabled() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}
