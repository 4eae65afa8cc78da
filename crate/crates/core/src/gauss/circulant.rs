//! Exact sampling of stationary Gaussian sequences by circulant embedding,
//! with a dense eigen-factorization fallback for short sequences whose
//! embedding is not nonnegative definite.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Negative eigenvalues down to `-CLIP_TOLERANCE * max_eigenvalue` are set to zero.
pub const CLIP_TOLERANCE: f64 = 1e-9;

/// Largest sequence length for which the dense fallback is attempted.
pub const DENSE_LIMIT: usize = 2048;

const MAX_DOUBLINGS: u32 = 3;

/// Precomputed spectrum of a circulant embedding of the autocovariance
/// `acov(0), ..., acov(n-1)`.
pub struct CirculantEmbedding {
    n: usize,
    m: usize,
    /// `sqrt(max(λ_k, 0) / m)`
    scale: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    min_eigenvalue: f64,
}

impl std::fmt::Debug for CirculantEmbedding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantEmbedding")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("min_eigenvalue", &self.min_eigenvalue)
            .finish()
    }
}

impl CirculantEmbedding {
    /// Minimal embedding of size `2(n-1)`, no padding.
    pub fn minimal(acov: &dyn Fn(usize) -> f64, n: usize) -> Result<Self> {
        Self::with_size(acov, n, embedding_size(n))
    }

    /// Tries the minimal embedding and up to three doublings of it.
    pub fn new(acov: &dyn Fn(usize) -> f64, n: usize) -> Result<Self> {
        let base = embedding_size(n);
        let mut last = None;
        for k in 0..=MAX_DOUBLINGS {
            match Self::with_size(acov, n, base << k) {
                Ok(e) => return Ok(e),
                Err(e) => last = Some(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }

    fn with_size(acov: &dyn Fn(usize) -> f64, n: usize, m: usize) -> Result<Self> {
        assert!(n >= 1 && m >= n.max(2) - 1);
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        let mut buf: Vec<Complex<f64>> = (0..m)
            .map(|j| Complex::new(acov(j.min(m - j)), 0.0))
            .collect();
        fft.process(&mut buf);
        let eig: Vec<f64> = buf.iter().map(|c| c.re).collect();
        let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(max > 0.0) || min < -CLIP_TOLERANCE * max {
            return Err(Error::EmbeddingFailed { min_eigenvalue: min });
        }
        let scale = eig.iter().map(|&l| (l.max(0.0) / m as f64).sqrt()).collect();
        Ok(Self {
            n,
            m,
            scale,
            fft,
            min_eigenvalue: min,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn embedding_size(&self) -> usize {
        self.m
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }
}

fn embedding_size(n: usize) -> usize {
    if n <= 1 {
        1
    } else {
        2 * (n - 1)
    }
}

/// Per-worker sampling state for a shared embedding. Each FFT yields two
/// independent sequences; the second is kept for the next call.
pub struct CirculantSampler {
    emb: Arc<CirculantEmbedding>,
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
    spare: Vec<f64>,
    has_spare: bool,
}

impl CirculantSampler {
    pub fn new(emb: Arc<CirculantEmbedding>) -> Self {
        let m = emb.m;
        let scratch_len = emb.fft.get_inplace_scratch_len();
        Self {
            buf: vec![Complex::new(0.0, 0.0); m],
            scratch: vec![Complex::new(0.0, 0.0); scratch_len],
            spare: vec![0.0; emb.n],
            has_spare: false,
            emb,
        }
    }

    pub fn fill<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [f64]) {
        let n = self.emb.n;
        debug_assert_eq!(out.len(), n);
        if self.has_spare {
            out.copy_from_slice(&self.spare);
            self.has_spare = false;
            return;
        }
        for (b, s) in self.buf.iter_mut().zip(&self.emb.scale) {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *b = Complex::new(s * re, s * im);
        }
        self.emb
            .fft
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        for i in 0..n {
            out[i] = self.buf[i].re;
            self.spare[i] = self.buf[i].im;
        }
        self.has_spare = true;
    }
}

/// `X = L Z` with `L L^T = C`, from a symmetric eigendecomposition.
#[derive(Debug, Clone)]
pub struct DenseFactor {
    n: usize,
    /// row-major `n x n`
    l: Vec<f64>,
}

impl DenseFactor {
    pub fn from_covariance(cov: &DMatrix<f64>) -> Result<Self> {
        let n = cov.nrows();
        if n != cov.ncols() || n == 0 {
            return Err(Error::Factorization("covariance must be square and nonempty".into()));
        }
        let eig = SymmetricEigen::new(cov.clone());
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        if !(max > 0.0) || min < -1e-8 * max {
            return Err(Error::Factorization(format!(
                "covariance is not positive semidefinite (min eigenvalue {min:e})"
            )));
        }
        let mut l = vec![0.0; n * n];
        for k in 0..n {
            let s = eig.eigenvalues[k].max(0.0).sqrt();
            if s == 0.0 {
                continue;
            }
            for i in 0..n {
                l[i * n + k] = eig.eigenvectors[(i, k)] * s;
            }
        }
        Ok(Self { n, l })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.l)
    }

    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, z: &mut Vec<f64>, out: &mut [f64]) {
        let n = self.n;
        z.clear();
        z.extend((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.l[i * n..(i + 1) * n];
            *o = row.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
        }
    }
}

/// Shared, immutable description of how to sample a stationary sequence.
#[derive(Debug, Clone)]
pub enum StationaryPlan {
    Circulant(Arc<CirculantEmbedding>),
    Dense(Arc<DenseFactor>),
}

impl StationaryPlan {
    /// Circulant embedding when it is nonnegative definite (after padding),
    /// otherwise a dense factorization for sequences up to [`DENSE_LIMIT`].
    pub fn new(acov: &dyn Fn(usize) -> f64, n: usize) -> Result<Self> {
        match CirculantEmbedding::new(acov, n) {
            Ok(e) => Ok(Self::Circulant(Arc::new(e))),
            Err(err) if n <= DENSE_LIMIT => {
                let cov = DMatrix::from_fn(n, n, |i, j| acov(i.abs_diff(j)));
                DenseFactor::from_covariance(&cov)
                    .map(|d| Self::Dense(Arc::new(d)))
                    .map_err(|_| err)
            }
            Err(err) => Err(err),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Circulant(e) => e.len(),
            Self::Dense(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sampler(&self) -> StationarySampler {
        match self {
            Self::Circulant(e) => StationarySampler::Circulant(CirculantSampler::new(e.clone())),
            Self::Dense(d) => StationarySampler::Dense(d.clone(), Vec::new()),
        }
    }
}

pub enum StationarySampler {
    Circulant(CirculantSampler),
    Dense(Arc<DenseFactor>, Vec<f64>),
}

impl StationarySampler {
    pub fn fill<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [f64]) {
        match self {
            Self::Circulant(s) => s.fill(rng, out),
            Self::Dense(d, z) => d.fill(rng, z, out),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn exponential_covariance_embeds() {
        let acov = |k: usize| (-0.1 * k as f64).exp();
        let e = CirculantEmbedding::minimal(&acov, 100).unwrap();
        assert_eq!(e.embedding_size(), 198);
        assert!(e.min_eigenvalue() > 0.0);
    }

    #[test]
    fn gaussian_covariance_needs_fallback() {
        // exp(-(kΔ)^2) with a long correlation range is not embeddable at these sizes.
        let acov = |k: usize| (-(0.002 * k as f64).powi(2)).exp();
        let err = CirculantEmbedding::new(&acov, 64).unwrap_err();
        match err {
            Error::EmbeddingFailed { min_eigenvalue } => assert!(min_eigenvalue < 0.0),
            other => panic!("unexpected {other:?}"),
        }
        let plan = StationaryPlan::new(&acov, 64).unwrap();
        assert!(matches!(plan, StationaryPlan::Dense(_)));
    }

    #[test]
    fn dense_factor_reproduces_covariance() {
        let cov = DMatrix::from_fn(5, 5, |i, j| (-(i.abs_diff(j) as f64)).exp());
        let f = DenseFactor::from_covariance(&cov).unwrap();
        let l = f.matrix();
        let back = &l * l.transpose();
        assert!((back - cov).abs().max() < 1e-12);
    }

    #[test]
    fn circulant_pairs_have_target_lag_one_correlation() {
        let rho = (-0.5f64).exp();
        let acov = move |k: usize| rho.powi(k as i32);
        let plan = StationaryPlan::new(&acov, 8).unwrap();
        let mut s = plan.sampler();
        let mut rng = stream(11, 0);
        let mut x = vec![0.0; 8];
        let n = 40_000;
        let (mut s00, mut s01) = (0.0, 0.0);
        for _ in 0..n {
            s.fill(&mut rng, &mut x);
            s00 += x[3] * x[3];
            s01 += x[3] * x[4];
        }
        let var = s00 / n as f64;
        let c1 = s01 / n as f64;
        assert!((var - 1.0).abs() < 0.03, "var {var}");
        assert!((c1 - rho).abs() < 0.03, "lag-1 {c1}");
    }
}
