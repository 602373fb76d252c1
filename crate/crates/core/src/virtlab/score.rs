use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::ScoreBreakdown;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub amplitude: f64,
    pub response_time: f64,
    pub reversibility: f64,
    pub sensitivity: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights { amplitude: 0.4, response_time: 0.2, reversibility: 0.2, sensitivity: 0.2 }
    }
}

/// Metric values that normalize to 1 (response time: that normalizes to 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceScales {
    pub amplitude: f64,
    pub response_time_s: f64,
    pub reversibility: f64,
    pub sensitivity: f64,
}

impl Default for ReferenceScales {
    fn default() -> Self {
        ReferenceScales { amplitude: 0.4, response_time_s: 60.0, reversibility: 1.0, sensitivity: 0.004 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ScoreError {
    #[error("weights must be nonnegative and sum to 1")]
    BadWeights,
    #[error("reference scales must be positive")]
    BadReference,
}

fn unit(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(0.0, 1.0)
    }
}

/// `Σ w_k · n_k` with `n_k = clamp(metric / ref, 0, 1)`, except
/// `n_time = clamp(1 − t90 / ref_time, 0, 1)`.
pub fn score(breakdown: &ScoreBreakdown, weights: &ScoreWeights, refs: &ReferenceScales) -> Result<f64, ScoreError> {
    let w = [weights.amplitude, weights.response_time, weights.reversibility, weights.sensitivity];
    if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(ScoreError::BadWeights);
    }
    let r = [refs.amplitude, refs.response_time_s, refs.reversibility, refs.sensitivity];
    if r.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(ScoreError::BadReference);
    }
    let n = [
        unit(breakdown.amplitude / refs.amplitude),
        unit(1.0 - breakdown.response_time_s / refs.response_time_s),
        unit(breakdown.reversibility / refs.reversibility),
        unit(breakdown.sensitivity / refs.sensitivity),
    ];
    Ok(unit(w.iter().zip(n).map(|(w, n)| w * n).sum()))
}
