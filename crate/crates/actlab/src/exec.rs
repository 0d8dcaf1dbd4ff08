use actlab_core::Executor;

/// Runs tasks on a fixed-size thread pool; results come back in task order.
pub struct Threads {
    pool: Option<rayon::ThreadPool>,
    workers: usize,
}

impl Threads {
    /// `workers <= 1` runs everything on the calling thread.
    pub fn new(workers: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        let workers = workers.max(1);
        let pool = if workers > 1 {
            Some(rayon::ThreadPoolBuilder::new().num_threads(workers).build()?)
        } else {
            None
        };
        Ok(Self { pool, workers })
    }
}

impl Executor for Threads {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        use rayon::prelude::*;
        match &self.pool {
            Some(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
            None => (0..n).map(f).collect(),
        }
    }

    fn workers(&self) -> usize {
        self.workers
    }
}
