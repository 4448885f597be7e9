//! Execution backends. Kernels are generic over a [`Backend`], so the choice
//! between a sequential loop and a rayon data-parallel loop is made at
//! compile time per instantiation.

use rayon::prelude::*;

pub trait Backend: Copy + Default + Send + Sync + 'static {
    const PARALLEL: bool;

    fn map<T, F>(n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;

    fn for_each<F>(n: usize, f: F)
    where
        F: Fn(usize) + Sync + Send;

    /// Fold `map(0) .. map(n-1)` with an associative `combine`.
    fn reduce<T, M, R>(n: usize, identity: T, map: M, combine: R) -> T
    where
        T: Send + Sync + Copy,
        M: Fn(usize) -> T + Sync + Send,
        R: Fn(T, T) -> T + Sync + Send;
}

/// Plain loops in index order. Floating-point results are bitwise
/// reproducible.
#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

/// Rayon-backed loops. Reductions are not bitwise reproducible.
#[derive(Debug, Clone, Copy, Default)]
pub struct Parallel;

impl Backend for Serial {
    const PARALLEL: bool = false;

    fn map<T, F>(n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }

    fn for_each<F>(n: usize, f: F)
    where
        F: Fn(usize) + Sync + Send,
    {
        (0..n).for_each(f)
    }

    fn reduce<T, M, R>(n: usize, identity: T, map: M, combine: R) -> T
    where
        T: Send + Sync + Copy,
        M: Fn(usize) -> T + Sync + Send,
        R: Fn(T, T) -> T + Sync + Send,
    {
        (0..n).fold(identity, |acc, i| combine(acc, map(i)))
    }
}

impl Backend for Parallel {
    const PARALLEL: bool = true;

    fn map<T, F>(n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).into_par_iter().map(f).collect()
    }

    fn for_each<F>(n: usize, f: F)
    where
        F: Fn(usize) + Sync + Send,
    {
        (0..n).into_par_iter().for_each(f)
    }

    fn reduce<T, M, R>(n: usize, identity: T, map: M, combine: R) -> T
    where
        T: Send + Sync + Copy,
        M: Fn(usize) -> T + Sync + Send,
        R: Fn(T, T) -> T + Sync + Send,
    {
        (0..n)
            .into_par_iter()
            .fold(|| identity, |acc, i| combine(acc, map(i)))
            .reduce(|| identity, &combine)
    }
}
