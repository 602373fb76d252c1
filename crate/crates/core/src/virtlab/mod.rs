//! Deterministic stand-in for the liquid handler, humidity rig and camera.
//!
//! A recipe is turned into a color-vs-time curve under a humidity program
//! ([`simulate_curve`]), the curve into four metrics ([`extract_metrics`]),
//! the metrics into a weighted score ([`score`]), and a pair of recipes into
//! a humidity calibration ([`calibrate_array`], [`evaluate_rmse`]).

mod calibration;
mod curve;
mod metrics;
mod score;
mod world;

pub use calibration::{
    calibrate_array, calibrate_array_with, evaluate_rmse, measure_features, CalibrationError, CalibrationModel,
    FEATURE_COUNT,
};
pub use curve::simulate_curve;
pub use metrics::{extract_metrics, MetricsError};
pub use score::{score, ReferenceScales, ScoreError, ScoreWeights};
pub use world::{IngredientResponse, Interaction, WorldModel};

use alloc::string::String;
use thiserror::Error;

use crate::domain::DomainError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VirtlabError {
    #[error("ingredient {0} is not modeled by the world")]
    UnknownIngredient(String),
    #[error(transparent)]
    Program(#[from] DomainError),
}
