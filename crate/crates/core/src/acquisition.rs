//! Upper-confidence-bound acquisition and diverse batch selection.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DomainError, Recipe};
use crate::gp::SurrogateModel;
use crate::simplex::sample_simplex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    /// Exploration weight on the predictive standard deviation.
    pub beta: f64,
    /// Number of uniform candidates scored per batch.
    pub pool_size: usize,
    /// Euclidean radius inside which already-selected points repel.
    pub diversity_radius: f64,
    /// Weight of the repulsion penalty.
    pub penalty: f64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        AcquisitionConfig { beta: 2.0, pool_size: 5000, diversity_radius: 0.05, penalty: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProposeError {
    #[error("batch size {batch} exceeds pool size {pool}")]
    BatchTooLarge { batch: usize, pool: usize },
    #[error("invalid acquisition config: {0}")]
    InvalidConfig(&'static str),
    #[error("model has dimension {model} but {ingredients} ingredients were given")]
    DimensionMismatch { model: usize, ingredients: usize },
    #[error(transparent)]
    Recipe(#[from] DomainError),
}

/// `μ(x) + β·σ(x)`.
pub fn acquire(model: &SurrogateModel, x: &[f64], beta: f64) -> f64 {
    let p = model.predict(x);
    if beta == 0.0 {
        p.mean
    } else {
        p.mean + beta * p.std_dev
    }
}

/// Greedy pick of `batch_size` pool points maximizing
/// `acquisition − λ · Σ_selected max(0, 1 − dist / r)`.
///
/// Returns pool points (coordinates in ingredient order). Ties go to the
/// lower pool index.
pub fn propose_points(
    model: &SurrogateModel,
    config: &AcquisitionConfig,
    batch_size: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, ProposeError> {
    if !(config.diversity_radius > 0.0) {
        return Err(ProposeError::InvalidConfig("diversity radius must be positive"));
    }
    if !(config.beta >= 0.0) || !(config.penalty >= 0.0) {
        return Err(ProposeError::InvalidConfig("beta and penalty must be nonnegative"));
    }
    if batch_size > config.pool_size {
        return Err(ProposeError::BatchTooLarge { batch: batch_size, pool: config.pool_size });
    }
    let pool = sample_simplex(config.pool_size, model.dimension(), seed);
    let scores: Vec<f64> = pool.iter().map(|x| acquire(model, x, config.beta)).collect();
    let mut penalty = vec![0.0; pool.len()];
    let mut taken = vec![false; pool.len()];
    let mut chosen = Vec::with_capacity(batch_size);

    for _ in 0..batch_size {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..pool.len() {
            if taken[i] {
                continue;
            }
            let v = scores[i] - config.penalty * penalty[i];
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        let Some((pick, _)) = best else { break };
        taken[pick] = true;
        for i in 0..pool.len() {
            if taken[i] {
                continue;
            }
            let d = libm::sqrt(pool[i].iter().zip(&pool[pick]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>());
            penalty[i] += (1.0 - d / config.diversity_radius).max(0.0);
        }
        chosen.push(pool[pick].clone());
    }
    Ok(chosen)
}

/// [`propose_points`] wrapped into recipes over `ingredients`.
pub fn propose_batch(
    model: &SurrogateModel,
    config: &AcquisitionConfig,
    ingredients: &[String],
    batch_size: usize,
    seed: u64,
) -> Result<Vec<Recipe>, ProposeError> {
    if ingredients.len() != model.dimension() {
        return Err(ProposeError::DimensionMismatch { model: model.dimension(), ingredients: ingredients.len() });
    }
    propose_points(model, config, batch_size, seed)?
        .into_iter()
        .map(|p| Ok(Recipe::from_fractions(ingredients.iter().cloned(), &p)?))
        .collect()
}
