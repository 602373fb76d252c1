//! The five-stage campaign: keywords, retrieval, mining, the human selection
//! gate, then closed-loop rounds, all persisted in a campaign directory.
//!
//! ```text
//! <dir>/config.json
//! <dir>/state.json               versioned, rewritten atomically
//! <dir>/candidates.json
//! <dir>/mining_stats.json
//! <dir>/exchange/round_<k>.json  written before the round is evaluated
//! <dir>/rounds/round_<k>.jsonl   one evaluation per line
//! <dir>/report.json
//! ```

mod config;
mod engine;
mod exchange;
mod report;
mod state;
mod store;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{AcquisitionSettings, CampaignConfig, ExchangeMode, SelectionRules};
pub use engine::{Campaign, RoundOptions, RoundSummary, SelectionInput, Services};
pub use exchange::{apportion, compile_exchange_file, ExchangeFile, ExchangeRecipe, ExchangeSubstance};
pub use report::{grid, round_report, CalibrationSummary, IngredientTotal, Report, ReportRecord, RoundStats};
pub use state::{
    CampaignState, Evaluation, PlannedRecipe, RoundRecord, RoundStatus, SelectedIngredient, Selection, Stage,
};
pub use store::{read_json, to_pretty, write_atomic, write_json, CampaignDir, LockGuard};

use crate::gateway::GatewayError;
use crate::literature::LiteratureError;
use crate::miner::MinerError;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("{0}")]
    PreconditionFailed(String),
    #[error("{0} is not in the candidate list")]
    UnknownCandidate(String),
    #[error("role constraint violated: {0}")]
    RoleConstraintViolated(String),
    #[error("invalid selection: {0}")]
    InvalidSelection(String),
    #[error("no completed rounds yet")]
    NoRounds,
    #[error("campaign is locked{}", .holder.map(|p| format!(" by process {p}")).unwrap_or_default())]
    Locked { holder: Option<u32> },
    #[error("evaluation failed in round {round}: {message}")]
    EvaluatorFailure { round: usize, message: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("a campaign already exists at {0}")]
    AlreadyExists(PathBuf),
    #[error("no campaign at {0}")]
    NotFound(PathBuf),
    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("optimizer: {0}")]
    Optimizer(String),
    #[error(transparent)]
    Literature(#[from] LiteratureError),
    #[error(transparent)]
    Miner(#[from] MinerError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CampaignError {
    pub fn io(path: &Path, source: std::io::Error) -> CampaignError {
        CampaignError::Io { path: path.to_path_buf(), source }
    }

    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            CampaignError::PreconditionFailed(_) => "wrong_stage",
            CampaignError::UnknownCandidate(_) => "unknown_candidate",
            CampaignError::RoleConstraintViolated(_) => "role_constraint_violated",
            CampaignError::InvalidSelection(_) => "invalid_selection",
            CampaignError::NoRounds => "no_rounds",
            CampaignError::Locked { .. } => "campaign_locked",
            CampaignError::EvaluatorFailure { .. } => "evaluator_failure",
            CampaignError::InvalidConfig(_) => "invalid_config",
            CampaignError::AlreadyExists(_) => "already_exists",
            CampaignError::NotFound(_) => "not_found",
            CampaignError::Corrupt { .. } => "corrupt_state",
            CampaignError::Optimizer(_) => "optimizer_failure",
            CampaignError::Literature(LiteratureError::MalformedOutput(_)) => "malformed_output",
            CampaignError::Literature(LiteratureError::Gateway(_))
            | CampaignError::Miner(MinerError::Gateway { .. })
            | CampaignError::Gateway(_) => "gateway_error",
            CampaignError::Literature(_) => "literature_error",
            CampaignError::Miner(_) => "mining_error",
            CampaignError::Io { .. } => "io_error",
        }
    }
}
