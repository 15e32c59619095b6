//! Index-parallel helpers. Each output slot is written by exactly one task,
//! so results do not depend on scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Collects `f(0..n)` in index order.
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Fallible variant of [`map_indexed`]; the error reported is the one with
/// the smallest index.
pub(crate) fn try_map_indexed<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    let results = map_indexed(n, f);
    results.into_iter().collect()
}

/// Calls `f(i, chunk_i)` for consecutive `width`-sized chunks of `out`.
pub(crate) fn for_each_chunk<T, F>(out: &mut [T], width: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        out.par_chunks_mut(width).enumerate().for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        out.chunks_mut(width).enumerate().for_each(|(i, c)| f(i, c));
    }
}
