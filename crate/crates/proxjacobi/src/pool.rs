//! Threaded block execution and wall-clock timings.

use std::time::Instant;

use rayon::prelude::*;

use proxjacobi_core::jacobi::{BlockExecutor, BlockTask, Clock};
use proxjacobi_core::subsolver::BlockSolveResult;

use crate::{Error, Result};

/// Runs the block solves of an iteration on a dedicated rayon pool. Results
/// come back in block order, so the serial reductions that follow see the
/// same inputs for any worker count.
pub struct PoolExecutor {
    pool: rayon::ThreadPool,
}

impl std::fmt::Debug for PoolExecutor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PoolExecutor")
            .field("workers", &self.pool.current_num_threads())
            .finish()
    }
}

impl PoolExecutor {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::Config("a pool needs at least one worker".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .thread_name(|i| format!("proxjacobi-{i}"))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl BlockExecutor for PoolExecutor {
    fn run(&self, blocks: usize, task: &BlockTask<'_>) -> Vec<proxjacobi_core::Result<BlockSolveResult>> {
        self.pool.install(|| (0..blocks).into_par_iter().map(task).collect())
    }
}

/// Milliseconds since construction.
#[derive(Debug, Clone, Copy)]
pub struct WallClock {
    start: Instant,
}

impl Default for WallClock {
    fn default() -> Self {
        Self { start: Instant::now() }
    }
}

impl Clock for WallClock {
    fn now_ms(&self) -> f64 {
        self.start.elapsed().as_secs_f64() * 1e3
    }
}
