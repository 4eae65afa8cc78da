//! Chunked, deterministic Monte Carlo.
//!
//! A run of `n` samples is cut into chunks of `chunk_size`; chunk `k` uses
//! RNG stream `k` and its own worker state. Chunks are evaluated on a rayon
//! pool and reassembled in chunk order, so output depends on
//! `(seed, chunk_size)` and not on the number of workers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::rng::{stream, StreamRng};

pub const MIN_SAMPLES: usize = 100;
pub const MIN_BATCHES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub n_samples: usize,
    pub seed: u64,
    pub chunk_size: usize,
    /// `0` uses rayon's default pool.
    pub workers: usize,
    pub batches: usize,
}

impl McSettings {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        Self {
            n_samples,
            seed,
            chunk_size: 1024,
            workers: 0,
            batches: 32,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.n_samples = n;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.n_samples >= MIN_SAMPLES, "n_samples", || {
            format!("need at least {MIN_SAMPLES} samples for a standard error, got {}", self.n_samples)
        })?;
        ensure(self.chunk_size >= 1, "chunk_size", || "must be >= 1".into())?;
        ensure(self.batches >= MIN_BATCHES, "batches", || {
            format!("need at least {MIN_BATCHES} batches, got {}", self.batches)
        })?;
        ensure(self.batches <= self.n_samples, "batches", || {
            "more batches than samples".into()
        })
    }

    pub fn n_chunks(&self) -> usize {
        self.n_samples.div_ceil(self.chunk_size)
    }
}

/// Row-major `n × width` table of per-sample outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    pub width: usize,
    pub data: Vec<f64>,
}

impl SampleMatrix {
    pub fn rows(&self) -> usize {
        self.data.len().checked_div(self.width).unwrap_or(0)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.data.iter().skip(j).step_by(self.width).copied().collect()
    }
}

pub fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Runs chunks `chunk_ids` with `rows_per_chunk` rows each (the last chunk
/// of a run may be shorter; `rows_in_chunk` decides).
pub fn run_chunks<S, I, F>(
    seed: u64,
    workers: usize,
    width: usize,
    chunk_ids: std::ops::Range<u64>,
    rows_in_chunk: impl Fn(u64) -> usize + Sync,
    init: I,
    sample: F,
) -> SampleMatrix
where
    I: Fn() -> S + Sync,
    F: Fn(&mut S, &mut StreamRng, &mut [f64]) + Sync,
{
    let chunks: Vec<Vec<f64>> = with_pool(workers, || {
        chunk_ids
            .into_par_iter()
            .map(|k| {
                let rows = rows_in_chunk(k);
                let mut rng = stream(seed, k);
                let mut state = init();
                let mut out = vec![0.0; rows * width];
                for r in 0..rows {
                    sample(&mut state, &mut rng, &mut out[r * width..(r + 1) * width]);
                }
                out
            })
            .collect()
    });
    SampleMatrix {
        width,
        data: chunks.concat(),
    }
}

/// Runs `settings.n_samples` rows.
pub fn run<S, I, F>(settings: &McSettings, width: usize, init: I, sample: F) -> SampleMatrix
where
    I: Fn() -> S + Sync,
    F: Fn(&mut S, &mut StreamRng, &mut [f64]) + Sync,
{
    let n = settings.n_samples;
    let cs = settings.chunk_size;
    run_chunks(
        settings.seed,
        settings.workers,
        width,
        0..settings.n_chunks() as u64,
        |k| (n - k as usize * cs).min(cs),
        init,
        sample,
    )
}

fn batch_bounds(n: usize, batches: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..batches).map(move |b| (b * n / batches, (b + 1) * n / batches))
}

/// Mean and batch-means standard error.
pub fn batch_mean(values: &[f64], batches: usize) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let b = batches.min(n).max(1);
    if b < 2 {
        return (mean, f64::NAN);
    }
    let means: Vec<f64> = batch_bounds(n, b)
        .map(|(lo, hi)| values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64)
        .collect();
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
    (mean, (var / b as f64).sqrt())
}

/// `Σ num / Σ den` with a batch-means standard error.
pub fn batch_ratio(num: &[f64], den: &[f64], batches: usize) -> (f64, f64) {
    assert_eq!(num.len(), den.len());
    let n = num.len() as f64;
    let mean_den = den.iter().sum::<f64>() / n;
    let total = num.iter().sum::<f64>() / n / mean_den;
    // delta method: batch means of the linearized residuals num − R·den,
    // which stays finite when a batch has no denominator mass
    let resid: Vec<f64> = num.iter().zip(den).map(|(a, b)| a - total * b).collect();
    let (_, se) = batch_mean(&resid, batches);
    (total, se / mean_den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn results_do_not_depend_on_workers() {
        let mut s = McSettings::new(5000, 42);
        s.chunk_size = 333;
        let f = |_: &mut (), rng: &mut StreamRng, out: &mut [f64]| {
            out[0] = rng.random::<f64>();
            out[1] = rng.random::<f64>();
        };
        let a = run(&s.with_workers(1), 2, || (), f);
        let b = run(&s.with_workers(3), 2, || (), f);
        assert_eq!(a, b);
        assert_eq!(a.rows(), 5000);
    }

    #[test]
    fn batch_mean_of_constant_has_zero_error() {
        let (m, se) = batch_mean(&[2.0; 300], 30);
        assert_eq!(m, 2.0);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn batch_error_matches_iid_scale() {
        let s = McSettings::new(100_000, 1);
        let m = run(&s, 1, || (), |_, rng, out| out[0] = rng.random::<f64>());
        let (mean, se) = batch_mean(&m.column(0), 32);
        let iid = (1.0f64 / 12.0 / 100_000.0).sqrt();
        assert!((mean - 0.5).abs() < 4.0 * iid);
        assert!(se > 0.5 * iid && se < 2.0 * iid, "se {se} vs {iid}");
    }

    #[test]
    fn batch_ratio_survives_empty_batches() {
        // first half has no denominator mass at all
        let den: Vec<f64> = (0..320).map(|i| if i < 160 { 0.0 } else { (i % 3) as f64 }).collect();
        let num: Vec<f64> = den.iter().map(|d| 2.0 * d).collect();
        let (r, se) = batch_ratio(&num, &den, 32);
        assert_eq!(r, 2.0);
        assert!(se.is_finite() && se < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(McSettings::new(99, 0).validate().is_err());
        assert!(McSettings::new(100, 0).validate().is_ok());
        let mut s = McSettings::new(1000, 0);
        s.batches = 10;
        assert!(s.validate().is_err());
    }
}
