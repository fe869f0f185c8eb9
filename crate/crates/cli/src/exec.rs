//! Thread-pool executor behind the `--threads` flag.
//!
//! Work items are scheduled across the pool but each item stays independent
//! and reductions happen in slot order afterwards, so results match the
//! sequential executor bit for bit.

use glassflow_core::Executor;
use rayon::prelude::*;

use crate::errors::{CliError, Result};

pub struct ThreadPool {
    pool: rayon::ThreadPool,
}

impl ThreadPool {
    pub fn new(threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
        Ok(ThreadPool { pool })
    }
}

impl Executor for ThreadPool {
    fn map_inplace<T: Send, F: Fn(&mut T) + Sync>(&self, items: &mut [T], f: F) {
        self.pool.install(|| items.par_iter_mut().for_each(|item| f(item)));
    }
}

/// Resolves the `--threads` flag; 0 or absent means all available cores.
pub fn thread_pool(threads: Option<usize>) -> Result<ThreadPool> {
    let count = match threads {
        Some(0) | None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        Some(n) => n,
    };
    ThreadPool::new(count)
}
