//! Seeded, worker-count independent Monte Carlo execution.
//!
//! Every work item draws from its own ChaCha stream keyed by
//! `(seed, item, purpose)`. Items run in fixed-size batches on a rayon pool
//! and are folded in index order; stopping rules are checked only between
//! batches, so the result never depends on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// What a random stream is used for. Different purposes never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Geometry = 1,
    Channel = 2,
    Data = 3,
    Noise = 4,
    Pilot = 5,
    BaselineData = 6,
    BaselineNoise = 7,
    Surface = 8,
}

/// Independent stream for `(seed, item, purpose)`.
pub fn stream(seed: u64, item: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&item.to_le_bytes());
    key[16..24].copy_from_slice(&(purpose as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Items evaluated per batch; fixed so results do not depend on workers.
pub const BATCH_ITEMS: u64 = 8;

/// Worker pool.
pub struct Engine {
    pool: rayon::ThreadPool,
    workers: usize,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("workers", &self.workers).finish()
    }
}

impl Engine {
    /// `workers = 0` uses the number of available cores.
    pub fn new(workers: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
        let workers = pool.current_num_threads();
        Ok(Engine { pool, workers })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Evaluates `f` on `0..n` and returns the results in index order.
    pub fn map<T, F>(&self, n: u64, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> Result<T> + Sync,
    {
        self.pool.install(|| (0..n).into_par_iter().map(&f).collect())
    }

    /// Runs items in batches of `batch` until `done(acc)` holds at a batch
    /// boundary or `max_items` items have run; returns the number run.
    pub fn run_until<T, A, F, G, D>(
        &self,
        batch: u64,
        max_items: u64,
        acc: &mut A,
        item: F,
        mut fold: G,
        mut done: D,
    ) -> Result<u64>
    where
        T: Send,
        F: Fn(u64) -> Result<T> + Sync,
        G: FnMut(&mut A, T),
        D: FnMut(&A) -> bool,
    {
        if batch == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        let mut next = 0;
        while next < max_items {
            let end = (next + batch).min(max_items);
            let out: Vec<T> = self
                .pool
                .install(|| (next..end).into_par_iter().map(&item).collect::<Result<_>>())?;
            for t in out {
                fold(acc, t);
            }
            next = end;
            if done(acc) {
                break;
            }
        }
        Ok(next)
    }
}
