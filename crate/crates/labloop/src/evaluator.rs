//! Turning recipes into scores: the seam where a real lab would plug in.

use labloop_core::virtlab::{extract_metrics, score, simulate_curve, ReferenceScales, ScoreWeights, WorldModel};
use labloop_core::{Recipe, RhProgram, ScoreBreakdown};
use thiserror::Error;

use crate::campaign::CampaignConfig;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{0}")]
pub struct EvalError(pub String);

/// Prepares and tests one recipe. `seed` fixes all measurement noise.
pub trait Evaluator: Sync {
    fn evaluate(&self, recipe: &Recipe, seed: u64) -> Result<ScoreBreakdown, EvalError>;
}

/// The virtual colorimetric lab.
#[derive(Debug, Clone)]
pub struct VirtlabEvaluator {
    pub world: WorldModel,
    pub program: RhProgram,
    pub weights: ScoreWeights,
    pub refs: ReferenceScales,
}

impl VirtlabEvaluator {
    pub fn from_config(config: &CampaignConfig) -> VirtlabEvaluator {
        VirtlabEvaluator {
            world: config.world_model(),
            program: config.program.clone(),
            weights: config.score_weights,
            refs: config.reference_scales,
        }
    }
}

impl Evaluator for VirtlabEvaluator {
    /// Flat curves are scored with their fallback metrics rather than failing.
    fn evaluate(&self, recipe: &Recipe, seed: u64) -> Result<ScoreBreakdown, EvalError> {
        let curve = simulate_curve(recipe, &self.program, &self.world, seed).map_err(|e| EvalError(e.to_string()))?;
        let mut b = match extract_metrics(&curve, &self.program) {
            Ok(b) => b,
            Err(e) => e.fallback().ok_or_else(|| EvalError(e.to_string()))?,
        };
        b.score = Some(score(&b, &self.weights, &self.refs).map_err(|e| EvalError(e.to_string()))?);
        Ok(b)
    }
}
