//! Sparse linear-regression data and DLN initialization.
//!
//! Every random draw comes from a ChaCha20 generator seeded with the run seed
//! and a fixed stream per purpose, so runs that share a seed see identical
//! data and initial weights whatever their method or position in a sweep.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::objective::{Dataset, ParamVector};
use crate::theory::AlphaVector;

/// Label noise standard deviation (variance 0.01).
pub const LABEL_NOISE_STD: f64 = 0.1;

const TRAIN_STREAM: u64 = 1;
const TEST_STREAM: u64 = 2;
const INIT_STREAM: u64 = 3;

/// Generator for one `(seed, stream)` pair.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Nonzero entries `1/√k*` on the first `k*` coordinates.
    pub beta_star: Vec<f64>,
    pub k_star: usize,
    pub mu: f64,
    pub sigma2: f64,
}

impl GroundTruth {
    pub fn new(d: usize, k_star: usize, mu: f64, sigma2: f64) -> Result<Self> {
        if k_star == 0 || k_star > d {
            return Err(Error::InvalidParameter(format!("k_star must lie in 1..={d}, got {k_star}")));
        }
        let value = 1.0 / (k_star as f64).sqrt();
        let beta_star = (0..d).map(|i| if i < k_star { value } else { 0.0 }).collect();
        Ok(Self { beta_star, k_star, mu, sigma2 })
    }
}

fn sample_dataset(truth: &GroundTruth, rows: usize, rng: &mut ChaCha20Rng) -> Result<Dataset> {
    let d = truth.beta_star.len();
    let feature = Normal::new(truth.mu, truth.sigma2.sqrt())
        .map_err(|e| Error::InvalidParameter(format!("feature distribution: {e}")))?;
    let noise = Normal::new(0.0, LABEL_NOISE_STD).expect("constant noise distribution");
    let x = DMatrix::from_row_iterator(rows, d, (0..rows * d).map(|_| feature.sample(rng)));
    let beta = DVector::from_column_slice(&truth.beta_star);
    let clean = &x * beta;
    let y = DVector::from_iterator(rows, clean.iter().map(|c| c + noise.sample(rng)));
    Dataset::new(x, y)
}

/// Train and test sets with `x ~ N(μ1, σ²I)` and `y ~ N(⟨β*, x⟩, 0.01)`.
pub fn generate_sparse_regression(cfg: &ExperimentConfig, seed: u64) -> Result<(Dataset, Dataset, GroundTruth)> {
    cfg.validate()?;
    let truth = GroundTruth::new(cfg.d, cfg.k_star, cfg.mu, cfg.sigma2)?;
    let train = sample_dataset(&truth, cfg.n, &mut stream_rng(seed, TRAIN_STREAM))?;
    let test = sample_dataset(&truth, cfg.n_test, &mut stream_rng(seed, TEST_STREAM))?;
    Ok((train, test, truth))
}

/// Draws `α₀ ~ N(0, alpha0_std²)` (redrawing entries below `10⁻¹²` in magnitude)
/// and returns `w₀ = (α₀, α₀)` with the scale `|α₀|`.
pub fn init_dln_weights(d: usize, alpha0_std: f64, seed: u64) -> Result<(ParamVector, AlphaVector)> {
    let normal = Normal::new(0.0, alpha0_std)
        .map_err(|e| Error::InvalidParameter(format!("alpha0_std must be positive: {e}")))?;
    if !(alpha0_std > 0.0) {
        return Err(Error::InvalidParameter("alpha0_std must be positive".into()));
    }
    let mut rng = stream_rng(seed, INIT_STREAM);
    let alpha0: Vec<f64> = (0..d)
        .map(|_| loop {
            let a: f64 = normal.sample(&mut rng);
            if a.abs() >= 1e-12 {
                break a;
            }
        })
        .collect();
    let w0 = ParamVector::stacked(&alpha0, &alpha0)?;
    let scale = AlphaVector::new(alpha0.iter().map(|a| a.abs()).collect())?;
    Ok((w0, scale))
}

/// Mean squared prediction error `(1/m) Σⱼ (⟨β, xⱼ⟩ − yⱼ)²`.
pub fn test_loss(beta: &[f64], test: &Dataset) -> Result<f64> {
    check_dim(test.d(), beta.len())?;
    if test.n() == 0 {
        return Err(Error::Empty("test set"));
    }
    let r = test.residual(&DVector::from_column_slice(beta))?;
    Ok(r.norm_squared() / test.n() as f64)
}

/// Uniform draw in `[lo, hi)`, used by the check suites.
pub(crate) fn uniform(rng: &mut ChaCha20Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}
