//! Execution strategy for embarrassingly parallel loops.
//!
//! With the `parallel` feature (on by default) `map_indexed` fans out over the
//! rayon thread pool; without it the same call runs sequentially on the
//! caller's thread. `map_indexed_seq` is always sequential and exists so the
//! bench suite can compare both paths.

#[cfg(feature = "parallel")]
pub fn map_indexed<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

/// Sequential reference path, independent of the feature flag.
pub fn map_indexed_seq<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

/// Name of the compiled execution mode, used to label benchmark groups.
pub const MODE: &str = if cfg!(feature = "parallel") {
    "parallel"
} else {
    "sequential"
};
