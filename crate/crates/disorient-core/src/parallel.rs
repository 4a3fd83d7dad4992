//! Deterministic data-parallel helpers.
//!
//! Work is split into fixed chunks of [`CHUNK`] items and chunk results are
//! combined strictly in chunk order, so floating-point output is identical
//! whatever the thread count, and identical between the `parallel` feature
//! and the sequential fallback (both paths run the same chunked
//! computation; only the executor differs).

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub const CHUNK: usize = 512;

/// Applies `f(index, item)` to every item, preserving input order.
pub fn map_indexed<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> U + Sync,
{
    let per_chunk = |(ci, chunk): (usize, &[T])| -> Vec<U> {
        chunk
            .iter()
            .enumerate()
            .map(|(i, t)| f(ci * CHUNK + i, t))
            .collect()
    };
    #[cfg(feature = "parallel")]
    let chunks: Vec<Vec<U>> = items.par_chunks(CHUNK).enumerate().map(per_chunk).collect();
    #[cfg(not(feature = "parallel"))]
    let chunks: Vec<Vec<U>> = items.chunks(CHUNK).enumerate().map(per_chunk).collect();

    let mut out = Vec::with_capacity(items.len());
    for mut c in chunks {
        out.append(&mut c);
    }
    out
}

/// Like [`map_indexed`] for fallible work; the error at the lowest input
/// index wins regardless of completion order.
pub fn try_map_indexed<T, U, E, F>(items: &[T], f: F) -> std::result::Result<Vec<U>, E>
where
    T: Sync,
    U: Send,
    E: Send,
    F: Fn(usize, &T) -> std::result::Result<U, E> + Sync,
{
    map_indexed(items, f).into_iter().collect()
}

/// Chunked fold: each chunk folds from `init.clone()` in item order, then
/// the chunk accumulators merge left to right.
pub fn fold_chunks<T, A, F, M>(items: &[T], init: A, fold: F, merge: M) -> A
where
    T: Sync,
    A: Send + Sync + Clone,
    F: Fn(A, usize, &T) -> A + Sync,
    M: Fn(A, A) -> A,
{
    let per_chunk = |(ci, chunk): (usize, &[T])| -> A {
        chunk
            .iter()
            .enumerate()
            .fold(init.clone(), |acc, (i, t)| fold(acc, ci * CHUNK + i, t))
    };
    #[cfg(feature = "parallel")]
    let accs: Vec<A> = items.par_chunks(CHUNK).enumerate().map(per_chunk).collect();
    #[cfg(not(feature = "parallel"))]
    let accs: Vec<A> = items.chunks(CHUNK).enumerate().map(per_chunk).collect();

    accs.into_iter().fold(init, merge)
}

/// Ordered chunked sum of `f` over the items.
pub fn sum_by<T: Sync>(items: &[T], f: impl Fn(&T) -> f64 + Sync) -> f64 {
    fold_chunks(items, 0.0, |acc, _, t| acc + f(t), |a, b| a + b)
}

/// Caps the global worker pool at `n` threads; `n = 0` keeps the default.
/// Without the `parallel` feature this only logs when `n > 1`.
pub fn configure_workers(n: usize) {
    #[cfg(feature = "parallel")]
    {
        if n == 0 {
            return;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::warn!("worker pool already initialized, keeping it: {e}");
        }
    }
    #[cfg(not(feature = "parallel"))]
    if n > 1 {
        log::warn!("built without the parallel feature; --workers {n} runs single-threaded");
    }
}
