//! Data-parallel map helpers with a sequential fallback.
//!
//! Every hot loop in the crate (grid scans, matrix assembly, per-mode
//! quasimode builds, pair scans) goes through these functions. With the
//! `parallel` feature (default) they dispatch to rayon; without it they are
//! plain loops. Both paths preserve input order, so artifacts are
//! byte-identical across feature choices and thread counts.
//!
//! Reductions are deliberately absent: callers collect ordered vectors and
//! fold sequentially, keeping floating-point summation order fixed.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map over a slice, preserving order.
#[cfg(feature = "parallel")]
pub fn map_slice<T: Sync, U: Send, F: Fn(&T) -> U + Sync + Send>(items: &[T], f: F) -> Vec<U> {
    items.par_iter().map(f).collect()
}

/// Map over a slice, preserving order.
#[cfg(not(feature = "parallel"))]
pub fn map_slice<T, U, F: Fn(&T) -> U>(items: &[T], f: F) -> Vec<U> {
    items.iter().map(f).collect()
}

/// Map over an index range `0..n`, preserving order.
#[cfg(feature = "parallel")]
pub fn map_range<U: Send, F: Fn(usize) -> U + Sync + Send>(n: usize, f: F) -> Vec<U> {
    (0..n).into_par_iter().map(f).collect()
}

/// Map over an index range `0..n`, preserving order.
#[cfg(not(feature = "parallel"))]
pub fn map_range<U, F: Fn(usize) -> U>(n: usize, f: F) -> Vec<U> {
    (0..n).map(f).collect()
}
