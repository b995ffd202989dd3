//! Execution strategy for the data-parallel loops (frames, resamples).
//!
//! With the `parallel` feature the work is spread over the rayon pool;
//! without it, or with [`Execution::Sequential`], everything runs on the
//! calling thread. Results are identical either way: ordered collection
//! preserves indices, and every reduction in this crate is exact.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when work will actually be spread over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// `(0..n).map(f)` collected in index order.
    pub fn map_collect<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Fold `items` into per-worker states and reduce them. The grouping is
    /// unspecified, so `fold`/`reduce` must be exactly associative for the
    /// result to be deterministic.
    pub fn fold_reduce<I, T, ID, FO, RE>(self, items: &[I], identity: ID, fold: FO, reduce: RE) -> T
    where
        I: Sync,
        T: Send,
        ID: Fn() -> T + Sync + Send,
        FO: Fn(T, &I) -> T + Sync + Send,
        RE: Fn(T, T) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return items
                .par_iter()
                .fold(&identity, &fold)
                .reduce(&identity, &reduce);
        }
        let _ = &reduce;
        items.iter().fold(identity(), fold)
    }
}
