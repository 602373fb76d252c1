use std::path::{Path, PathBuf};

use labloop_core::virtlab::{score, ReferenceScales, ScoreWeights, WorldModel};
use labloop_core::{AcquisitionConfig, RhProgram, ScoreBreakdown};
use serde::{Deserialize, Serialize};

use super::CampaignError;
use crate::gateway::GatewayConfig;

/// Fractions or absolute volumes in exchange files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExchangeMode {
    #[default]
    Fraction,
    Absolute,
}

/// Pool search settings shared by every model-guided round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionSettings {
    pub pool_size: usize,
    pub diversity_radius: f64,
    pub penalty: f64,
}

impl Default for AcquisitionSettings {
    fn default() -> Self {
        let d = AcquisitionConfig::default();
        AcquisitionSettings { pool_size: d.pool_size, diversity_radius: d.diversity_radius, penalty: d.penalty }
    }
}

impl AcquisitionSettings {
    pub fn with_beta(&self, beta: f64) -> AcquisitionConfig {
        AcquisitionConfig {
            beta,
            pool_size: self.pool_size,
            diversity_radius: self.diversity_radius,
            penalty: self.penalty,
        }
    }
}

/// Role requirements on the human selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionRules {
    pub min_colorants: usize,
    pub solvents: usize,
}

impl Default for SelectionRules {
    fn default() -> Self {
        SelectionRules { min_colorants: 1, solvents: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub requirement: String,
    /// Directory holding the corpus `index.json`.
    pub corpus: PathBuf,
    #[serde(default)]
    pub gateway: GatewayConfig,
    #[serde(default = "defaults::top_k")]
    pub top_k: usize,
    #[serde(default = "defaults::threshold")]
    pub article_threshold: f64,
    #[serde(default = "defaults::threshold")]
    pub reagent_threshold: f64,
    #[serde(default)]
    pub selection_rules: SelectionRules,
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    #[serde(default = "defaults::rounds")]
    pub rounds: usize,
    #[serde(default = "defaults::beta_schedule")]
    pub beta_schedule: Vec<f64>,
    #[serde(default)]
    pub acquisition: AcquisitionSettings,
    #[serde(default)]
    pub score_weights: ScoreWeights,
    #[serde(default)]
    pub reference_scales: ReferenceScales,
    #[serde(default)]
    pub program: RhProgram,
    /// Virtual lab parameters; the built-in reference world when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub world: Option<WorldModel>,
    #[serde(default = "defaults::total_volume")]
    pub total_volume_ul: f64,
    #[serde(default)]
    pub exchange_mode: ExchangeMode,
    #[serde(default = "defaults::top_n")]
    pub report_top_n: usize,
    #[serde(default)]
    pub seed: u64,
}

mod defaults {
    pub fn top_k() -> usize {
        500
    }
    pub fn threshold() -> f64 {
        0.8
    }
    pub fn batch_size() -> usize {
        96
    }
    pub fn rounds() -> usize {
        5
    }
    pub fn beta_schedule() -> Vec<f64> {
        vec![2.0, 2.0, 3.0, 3.0, 1.0]
    }
    pub fn total_volume() -> f64 {
        200.0
    }
    pub fn top_n() -> usize {
        10
    }
}

impl CampaignConfig {
    /// Defaults everywhere except the requirement and corpus.
    pub fn new(requirement: &str, corpus: &Path) -> CampaignConfig {
        serde_json::from_value(serde_json::json!({ "requirement": requirement, "corpus": corpus }))
            .expect("defaults deserialize")
    }

    /// Reads a config file; relative paths inside are taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> Result<CampaignConfig, CampaignError> {
        let text = std::fs::read_to_string(path).map_err(|e| CampaignError::io(path, e))?;
        let mut config: CampaignConfig = serde_json::from_str(&text)
            .map_err(|e| CampaignError::InvalidConfig(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    /// Makes the corpus and fixture paths absolute against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &Path| -> PathBuf {
            let joined = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
            joined.canonicalize().unwrap_or(joined)
        };
        self.corpus = fix(&self.corpus);
        if let Some(f) = &self.gateway.fixture {
            self.gateway.fixture = Some(fix(f));
        }
    }

    /// Changes the round count, truncating the β schedule or repeating its
    /// last entry.
    pub fn set_rounds(&mut self, rounds: usize) {
        let last = self.beta_schedule.last().copied().unwrap_or(1.0);
        self.beta_schedule.resize(rounds, last);
        self.rounds = rounds;
    }

    pub fn world_model(&self) -> WorldModel {
        self.world.clone().unwrap_or_else(WorldModel::reference)
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        let bad = |m: &str| Err(CampaignError::InvalidConfig(m.to_string()));
        if self.requirement.trim().is_empty() {
            return bad("requirement is empty");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.rounds == 0 {
            return bad("rounds must be at least 1");
        }
        if self.beta_schedule.len() != self.rounds {
            return Err(CampaignError::InvalidConfig(format!(
                "beta_schedule has {} entries but rounds is {}",
                self.beta_schedule.len(),
                self.rounds
            )));
        }
        if self.beta_schedule.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return bad("beta values must be finite and nonnegative");
        }
        if self.top_k == 0 {
            return bad("top_k must be at least 1");
        }
        for t in [self.article_threshold, self.reagent_threshold] {
            if !(0.0..=1.0).contains(&t) {
                return bad("thresholds must lie in [0, 1]");
            }
        }
        if self.acquisition.pool_size < self.batch_size {
            return bad("acquisition.pool_size must be at least batch_size");
        }
        if !(self.acquisition.diversity_radius > 0.0) || !(self.acquisition.penalty >= 0.0) {
            return bad("diversity_radius must be positive and penalty nonnegative");
        }
        if !(self.total_volume_ul > 0.0 && self.total_volume_ul.is_finite()) {
            return bad("total_volume_ul must be positive");
        }
        if self.report_top_n == 0 {
            return bad("report_top_n must be at least 1");
        }
        self.program.validate().map_err(|e| CampaignError::InvalidConfig(format!("program: {e}")))?;
        let probe =
            ScoreBreakdown { amplitude: 0.0, response_time_s: 0.0, reversibility: 0.0, sensitivity: 0.0, score: None };
        score(&probe, &self.score_weights, &self.reference_scales)
            .map_err(|e| CampaignError::InvalidConfig(format!("scoring: {e}")))?;
        self.gateway.validate().map_err(|e| CampaignError::InvalidConfig(e.to_string()))?;
        Ok(())
    }
}
