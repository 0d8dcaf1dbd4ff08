//! Task fan-out abstraction.
//!
//! Every parallel region in the crate is expressed as `map(n, f)` over task
//! indices. Each task derives its own random stream from its index, and results
//! come back in index order, so outputs never depend on how tasks are
//! scheduled or how many workers run them.

use alloc::vec::Vec;

pub trait Executor: Sync {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync;

    fn workers(&self) -> usize {
        1
    }
}

/// Runs tasks in index order on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        (0..n).map(f).collect()
    }
}

impl<E: Executor + ?Sized> Executor for &E {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        (**self).map(n, f)
    }

    fn workers(&self) -> usize {
        (**self).workers()
    }
}
