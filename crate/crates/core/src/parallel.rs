//! Ordered parallel map over task indices.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Evaluates `f(0..n)` on `parallelism` threads and returns results in index
/// order. Output never depends on the thread count as long as `f` is pure in
/// its index.
pub fn run_indexed<T, F>(n: usize, parallelism: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if parallelism <= 1 || n <= 1 {
        return Ok((0..n).map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::Numerical(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(f).collect()))
}

/// Pairwise sum in a fixed tree shape.
pub fn tree_sum<T: Clone>(items: &[T], add: &impl Fn(&T, &T) -> T) -> Option<T> {
    match items.len() {
        0 => None,
        1 => Some(items[0].clone()),
        len => {
            let (l, r) = items.split_at(len / 2);
            Some(add(&tree_sum(l, add)?, &tree_sum(r, add)?))
        }
    }
}
