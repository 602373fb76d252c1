//! Gaussian-process surrogate over the composition simplex.
//!
//! Squared-exponential kernel `k(x, x') = σf² · exp(−‖x − x'‖² / (2ℓ²))`
//! with i.i.d. observation noise `σn²`. Targets are standardized before
//! fitting and predictions are mapped back to the original scale.
//! Hyperparameters are picked by exhaustive search over a fixed logarithmic
//! grid, maximizing the log marginal likelihood
//!
//! ```text
//! log p(y | X) = −½ yᵀα − Σ log L_ii − (n/2) log 2π,   α = (K + σn²I)⁻¹ y
//! ```
//!
//! where `L` is the Cholesky factor of `K + σn²I`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{cholesky, solve_lower, solve_lower_transpose, Matrix};

const LN_2PI: f64 = 1.837_877_066_409_345_3;
/// Target variance below which standardization is skipped.
const DEGENERATE_VARIANCE: f64 = 1e-12;
/// Allowed drift of `Σ x` away from one for training and query points.
const SIMPLEX_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpError {
    #[error("need at least two training points, got {0}")]
    InsufficientData(usize),
    #[error("{inputs} inputs but {targets} targets")]
    LengthMismatch { inputs: usize, targets: usize },
    #[error("training point {0} has the wrong dimension")]
    DimensionMismatch(usize),
    #[error("training point {0} is not on the simplex")]
    NotOnSimplex(usize),
    #[error("non-finite training value at index {0}")]
    NonFinite(usize),
    #[error("kernel matrix is not positive definite for any grid setting")]
    SingularKernel,
    #[error("invalid kernel parameters")]
    InvalidParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub signal_variance: f64,
    pub length_scale: f64,
    pub noise_variance: f64,
}

impl KernelParams {
    fn is_valid(&self) -> bool {
        self.signal_variance > 0.0
            && self.length_scale > 0.0
            && self.noise_variance >= 1e-6
            && self.signal_variance.is_finite()
            && self.length_scale.is_finite()
            && self.noise_variance.is_finite()
    }
}

/// Candidate hyperparameter values searched by [`fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub length_scales: Vec<f64>,
    pub signal_variances: Vec<f64>,
    pub noise_variances: Vec<f64>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        HyperGrid {
            length_scales: vec![0.05, 0.1, 0.2, 0.5, 1.0, 2.0],
            signal_variances: vec![0.1, 0.316_227_766, 1.0, 3.162_277_66, 10.0],
            noise_variances: vec![1e-6, 1e-4, 1e-2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub std_dev: f64,
}

/// A fitted, immutable GP posterior.
#[derive(Debug, Clone)]
pub struct SurrogateModel {
    inputs: Vec<Vec<f64>>,
    params: KernelParams,
    target_mean: f64,
    target_scale: f64,
    chol: Matrix,
    alpha: Vec<f64>,
    log_marginal_likelihood: f64,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn validate(inputs: &[Vec<f64>], targets: &[f64]) -> Result<(), GpError> {
    if inputs.len() != targets.len() {
        return Err(GpError::LengthMismatch { inputs: inputs.len(), targets: targets.len() });
    }
    if inputs.len() < 2 {
        return Err(GpError::InsufficientData(inputs.len()));
    }
    let dim = inputs[0].len();
    for (i, (x, y)) in inputs.iter().zip(targets).enumerate() {
        if x.len() != dim || dim == 0 {
            return Err(GpError::DimensionMismatch(i));
        }
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(GpError::NonFinite(i));
        }
        let total: f64 = x.iter().sum();
        if x.iter().any(|v| *v < -SIMPLEX_SLACK) || (total - 1.0).abs() > SIMPLEX_SLACK {
            return Err(GpError::NotOnSimplex(i));
        }
    }
    Ok(())
}

fn standardize(targets: &[f64]) -> (f64, f64, Vec<f64>) {
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    let var = targets.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
    let scale = if var < DEGENERATE_VARIANCE { 1.0 } else { libm::sqrt(var) };
    let z = targets.iter().map(|y| (y - mean) / scale).collect();
    (mean, scale, z)
}

struct Factorized {
    chol: Matrix,
    alpha: Vec<f64>,
    lml: f64,
}

fn factorize(correlation: &Matrix, z: &[f64], params: &KernelParams) -> Option<Factorized> {
    let n = z.len();
    let k = Matrix::from_fn(n, n, |i, j| {
        let v = params.signal_variance * correlation.get(i, j);
        if i == j {
            v + params.noise_variance
        } else {
            v
        }
    });
    let chol = cholesky(&k).ok()?;
    let alpha = solve_lower_transpose(&chol, &solve_lower(&chol, z));
    let fit_term: f64 = z.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    let log_det: f64 = (0..n).map(|i| libm::log(chol.get(i, i))).sum();
    let lml = -0.5 * fit_term - log_det - 0.5 * n as f64 * LN_2PI;
    lml.is_finite().then_some(Factorized { chol, alpha, lml })
}

fn correlation_matrix(sq_dist: &Matrix, length_scale: f64) -> Matrix {
    let inv = 1.0 / (2.0 * length_scale * length_scale);
    let n = sq_dist.rows();
    Matrix::from_fn(n, n, |i, j| libm::exp(-sq_dist.get(i, j) * inv))
}

fn pairwise(inputs: &[Vec<f64>]) -> Matrix {
    let n = inputs.len();
    Matrix::from_fn(n, n, |i, j| squared_distance(&inputs[i], &inputs[j]))
}

/// Fits with the default hyperparameter grid.
pub fn fit(inputs: &[Vec<f64>], targets: &[f64]) -> Result<SurrogateModel, GpError> {
    fit_with_grid(inputs, targets, &HyperGrid::default())
}

/// Fits by maximizing the log marginal likelihood over `grid`. The first
/// best setting in grid order wins ties, so the result is reproducible.
pub fn fit_with_grid(inputs: &[Vec<f64>], targets: &[f64], grid: &HyperGrid) -> Result<SurrogateModel, GpError> {
    validate(inputs, targets)?;
    let (target_mean, target_scale, z) = standardize(targets);
    let sq = pairwise(inputs);

    let mut best: Option<(KernelParams, Factorized)> = None;
    for &length_scale in &grid.length_scales {
        if !(length_scale > 0.0) {
            return Err(GpError::InvalidParams);
        }
        let corr = correlation_matrix(&sq, length_scale);
        for &signal_variance in &grid.signal_variances {
            for &noise_variance in &grid.noise_variances {
                let params = KernelParams { signal_variance, length_scale, noise_variance };
                if !params.is_valid() {
                    return Err(GpError::InvalidParams);
                }
                if let Some(f) = factorize(&corr, &z, &params) {
                    if best.as_ref().is_none_or(|(_, b)| f.lml > b.lml) {
                        best = Some((params, f));
                    }
                }
            }
        }
    }
    let (params, f) = best.ok_or(GpError::SingularKernel)?;
    Ok(SurrogateModel {
        inputs: inputs.to_vec(),
        params,
        target_mean,
        target_scale,
        chol: f.chol,
        alpha: f.alpha,
        log_marginal_likelihood: f.lml,
    })
}

/// Fits with fixed hyperparameters.
pub fn fit_with_params(inputs: &[Vec<f64>], targets: &[f64], params: KernelParams) -> Result<SurrogateModel, GpError> {
    if !params.is_valid() {
        return Err(GpError::InvalidParams);
    }
    fit_with_grid(
        inputs,
        targets,
        &HyperGrid {
            length_scales: vec![params.length_scale],
            signal_variances: vec![params.signal_variance],
            noise_variances: vec![params.noise_variance],
        },
    )
}

impl SurrogateModel {
    pub fn params(&self) -> KernelParams {
        self.params
    }

    pub fn dimension(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn training_inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    /// Mean subtracted from the targets before fitting.
    pub fn target_mean(&self) -> f64 {
        self.target_mean
    }

    /// Standard deviation the targets were divided by (1 for constant targets).
    pub fn target_scale(&self) -> f64 {
        self.target_scale
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.log_marginal_likelihood
    }

    /// Posterior mean and predictive standard deviation (noise included) in
    /// target units.
    pub fn predict(&self, x: &[f64]) -> Prediction {
        let (mean, var) = self.predict_standardized(x);
        Prediction { mean: self.target_mean + self.target_scale * mean, std_dev: self.target_scale * libm::sqrt(var) }
    }

    /// Posterior mean and variance in standardized units.
    pub fn predict_standardized(&self, x: &[f64]) -> (f64, f64) {
        let inv = 1.0 / (2.0 * self.params.length_scale * self.params.length_scale);
        let kstar: Vec<f64> = self
            .inputs
            .iter()
            .map(|xi| self.params.signal_variance * libm::exp(-squared_distance(xi, x) * inv))
            .collect();
        let mean: f64 = kstar.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let v = solve_lower(&self.chol, &kstar);
        let explained: f64 = v.iter().map(|x| x * x).sum();
        let prior = self.params.signal_variance + self.params.noise_variance;
        (mean, (prior - explained).max(0.0))
    }
}
