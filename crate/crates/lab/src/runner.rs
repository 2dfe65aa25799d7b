//! Rayon execution of Monte Carlo blocks.

use anyhow::{Context, Result};
use mangle_core::mc::BlockRunner;
use rayon::prelude::*;

/// A thread pool of a fixed size. Results do not depend on the size.
pub struct Pool {
    pool: rayon::ThreadPool,
}

impl Pool {
    /// `None` uses every available core.
    pub fn new(workers: Option<usize>) -> Result<Self> {
        let n =
            workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .context("starting worker threads")?;
        Ok(Self { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl BlockRunner for Pool {
    fn map_blocks<T, F>(&self, n_blocks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool
            .install(|| (0..n_blocks).into_par_iter().map(f).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mangle_core::mc::{simulate_survivors, Serial, Tilt, WalkSpec};
    use mangle_core::DecoherenceParams;

    #[test]
    fn matches_serial_bit_for_bit() {
        let spec = WalkSpec::new(DecoherenceParams::new(0.55, 1.0).unwrap(), 0.2, 120)
            .unwrap()
            .with_tilt(Tilt::Measure);
        let serial = simulate_survivors(&spec, 30_000, 42, &Serial).unwrap();
        for workers in [1, 3] {
            let pool = Pool::new(Some(workers)).unwrap();
            assert_eq!(pool.workers(), workers);
            assert_eq!(
                simulate_survivors(&spec, 30_000, 42, &pool).unwrap(),
                serial
            );
        }
    }
}
