//! Order-preserving map over work units, optionally on a worker pool.

use crate::error::Result;
#[cfg(feature = "parallel")]
use crate::error::Error;

#[cfg(feature = "parallel")]
pub(crate) fn map_units<T, R, F>(units: &[T], workers: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync,
{
    use rayon::prelude::*;
    if workers == 1 {
        return units.iter().map(f).collect();
    }
    let run = || units.par_iter().map(&f).collect::<Result<Vec<R>>>();
    if workers == 0 {
        return run();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Validation(format!("cannot start worker pool: {e}")))?
        .install(run)
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_units<T, R, F>(units: &[T], _workers: usize, f: F) -> Result<Vec<R>>
where
    F: Fn(&T) -> Result<R>,
{
    units.iter().map(f).collect()
}
