//! Parallel trials with per-trial random streams.

use adaquery_core::SessionRng;
use rand::SeedableRng;
use rayon::prelude::*;

use crate::error::RunError;

/// Trial `t` draws from stream `t` of the generator keyed by `seed`, so its
/// randomness does not depend on scheduling or on the number of jobs.
pub fn trial_rng(seed: u64, trial: usize) -> SessionRng {
    let mut rng = SessionRng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

pub struct Runner {
    pool: rayon::ThreadPool,
}

impl Runner {
    /// `jobs = None` uses one worker per available core.
    pub fn new(jobs: Option<usize>) -> Result<Self, RunError> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(j) = jobs {
            if j == 0 {
                return Err(RunError::field("--jobs", "must be >= 1"));
            }
            builder = builder.num_threads(j);
        }
        let pool = builder
            .build()
            .map_err(|e| RunError::Config(format!("thread pool: {e}")))?;
        Ok(Runner { pool })
    }

    /// Runs `trials` independent trials; results come back in trial order.
    pub fn trials<T, F>(&self, trials: usize, seed: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, &mut SessionRng) -> T + Sync + Send,
    {
        self.pool.install(|| {
            (0..trials)
                .into_par_iter()
                .map(|t| f(t, &mut trial_rng(seed, t)))
                .collect()
        })
    }
}
