use labloop_core::{ArticleRecord, CandidateList, Recipe, Role, ScoreBreakdown};
use serde::{Deserialize, Serialize};

use crate::miner::MiningStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Analysis,
    Retrieval,
    Mining,
    Feedback,
    Execution,
    Done,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Analysis => "analysis",
            Stage::Retrieval => "retrieval",
            Stage::Mining => "mining",
            Stage::Feedback => "feedback",
            Stage::Execution => "execution",
            Stage::Done => "done",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectedIngredient {
    pub cas: String,
    pub name: String,
    pub role: Role,
}

/// The researcher's approved ingredient set, in recipe order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub ingredients: Vec<SelectedIngredient>,
    /// Free dimensions of the composition simplex: ingredients minus one.
    pub dimension: usize,
}

impl Selection {
    pub fn cas_codes(&self) -> Vec<String> {
        self.ingredients.iter().map(|i| i.cas.clone()).collect()
    }
}

/// A recipe queued for evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedRecipe {
    pub recipe_id: String,
    pub recipe: Recipe,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub recipe_id: String,
    pub recipe: Recipe,
    pub seed: u64,
    pub breakdown: ScoreBreakdown,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundStatus {
    Pending,
    Failed,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based.
    pub index: usize,
    /// Exploration weight; absent for the random first round.
    pub beta: Option<f64>,
    pub status: RoundStatus,
    /// Queued recipes while the round is pending or failed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub batch: Vec<PlannedRecipe>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub results: Vec<Evaluation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Everything a campaign has decided so far. Written as `state.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignState {
    pub version: u64,
    pub stage: Stage,
    #[serde(default)]
    pub keywords: Vec<String>,
    /// Retrieved articles with their relevance, in search order.
    #[serde(default)]
    pub articles: Vec<ArticleRecord>,
    /// Ids of the articles that passed the relevance filter.
    #[serde(default)]
    pub relevant_articles: Vec<String>,
    #[serde(default)]
    pub candidates: Option<CandidateList>,
    #[serde(default)]
    pub mining: Option<MiningStats>,
    #[serde(default)]
    pub selection: Option<Selection>,
    #[serde(default)]
    pub rounds: Vec<RoundRecord>,
}

impl Default for CampaignState {
    fn default() -> Self {
        CampaignState {
            version: 0,
            stage: Stage::Analysis,
            keywords: Vec::new(),
            articles: Vec::new(),
            relevant_articles: Vec::new(),
            candidates: None,
            mining: None,
            selection: None,
            rounds: Vec::new(),
        }
    }
}

impl CampaignState {
    pub fn completed_rounds(&self) -> impl Iterator<Item = &RoundRecord> {
        self.rounds.iter().filter(|r| r.status == RoundStatus::Complete)
    }

    pub fn completed_count(&self) -> usize {
        self.completed_rounds().count()
    }

    /// Every evaluation of every completed round, in order.
    pub fn history(&self) -> impl Iterator<Item = &Evaluation> {
        self.completed_rounds().flat_map(|r| r.results.iter())
    }

    /// Best score after each completed round.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::NEG_INFINITY;
        self.completed_rounds()
            .map(|r| {
                for e in &r.results {
                    best = best.max(e.score);
                }
                best
            })
            .collect()
    }

    /// The unfinished round, if the last one is pending or failed.
    pub fn open_round(&self) -> Option<&RoundRecord> {
        self.rounds.last().filter(|r| r.status != RoundStatus::Complete)
    }
}
