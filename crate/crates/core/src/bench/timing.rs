//! Wall-clock timing of batched forward passes.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{forward_with, make_channels, ModelConfig, Params, Reduction};
use crate::tensor::Matrix;

const WARMUP: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub median_ms: f64,
    pub p90_ms: f64,
    pub workers: usize,
    /// logits of every batch element from the last repeat
    pub outputs: Vec<Vec<f64>>,
}

/// Times `repeats` forward passes over a seeded random batch.
///
/// `parallel = false` runs on a single worker with the sequential reduction; otherwise
/// batch elements and timestep blocks are spread over `workers` threads.
pub fn time_forward(
    config: &ModelConfig,
    batch: usize,
    parallel: bool,
    repeats: usize,
    workers: usize,
) -> Result<TimingReport> {
    if repeats < 5 {
        return Err(Error::InvalidInput(format!(
            "need at least 5 repeats, got {repeats}"
        )));
    }
    if batch == 0 {
        return Err(Error::InvalidInput("batch must be positive".into()));
    }
    let channels = make_channels(config)?;
    let params = Params::init(config, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let inputs: Vec<Matrix> = (0..batch)
        .map(|_| {
            Matrix::from_fn(config.seq_len, config.input_dim, |_, _| {
                rng.random_range(-1.0..1.0)
            })
        })
        .collect();

    let workers = if parallel { workers.max(1) } else { 1 };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;

    let run = || -> Result<Vec<Vec<f64>>> {
        if parallel {
            inputs
                .par_iter()
                .map(|s| {
                    forward_with(&params, &channels, s, config, Reduction::Parallel).map(|(y, _)| y)
                })
                .collect()
        } else {
            inputs
                .iter()
                .map(|s| {
                    forward_with(&params, &channels, s, config, Reduction::Sequential)
                        .map(|(y, _)| y)
                })
                .collect()
        }
    };

    pool.install(|| {
        for _ in 0..WARMUP {
            run()?;
        }
        let mut times = Vec::with_capacity(repeats);
        let mut outputs = Vec::new();
        for _ in 0..repeats {
            let start = Instant::now();
            outputs = run()?;
            times.push(start.elapsed().as_secs_f64() * 1e3);
        }
        times.sort_by(f64::total_cmp);
        Ok(TimingReport {
            median_ms: percentile(&times, 0.5),
            p90_ms: percentile(&times, 0.9),
            workers,
            outputs,
        })
    })
}

/// Nearest-rank percentile of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}
