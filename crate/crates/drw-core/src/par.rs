//! Data-parallel helpers with a sequential fallback.
//!
//! Independent work units (seed repetitions, per-target hitting-time solves,
//! per-partition exit tables) go through these. With the `parallel` feature
//! (default) they fan out on rayon; without it they run sequentially. Both
//! paths produce identical output ordering, so results are deterministic
//! either way. The explicit `*_sequential` variants exist for benchmarks.

use crate::error::Result;

pub fn map_sequential<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    F: Fn(T) -> R,
{
    items.into_iter().map(f).collect()
}

pub fn try_map_sequential<T, R, F>(items: impl IntoIterator<Item = T>, f: F) -> Result<Vec<R>>
where
    F: Fn(T) -> Result<R>,
{
    items.into_iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    F: Fn(T) -> R,
{
    map_sequential(items, f)
}

#[cfg(feature = "parallel")]
pub fn try_map<T, R, F>(items: impl rayon::iter::IntoParallelIterator<Item = T>, f: F) -> Result<Vec<R>>
where
    T: Send,
    R: Send,
    F: Fn(T) -> Result<R> + Sync + Send,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn try_map<T, R, F>(items: impl IntoIterator<Item = T>, f: F) -> Result<Vec<R>>
where
    F: Fn(T) -> Result<R>,
{
    try_map_sequential(items, f)
}
