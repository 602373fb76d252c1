use labloop_core::seed::derive;
use labloop_core::stats::{histogram, median};
use labloop_core::virtlab::{calibrate_array, evaluate_rmse, WorldModel};
use labloop_core::{Recipe, Role, ScoreBreakdown};
use serde::{Deserialize, Serialize};

use super::config::CampaignConfig;
use super::state::CampaignState;
use super::CampaignError;

pub const HISTOGRAM_BINS: usize = 20;
/// Scores below this count as near zero.
pub const NEAR_ZERO: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportIngredient {
    pub cas: String,
    pub name: String,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngredientTotal {
    pub cas: String,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub round: usize,
    pub beta: Option<f64>,
    pub evaluations: usize,
    pub max: f64,
    pub median: f64,
    pub near_zero_fraction: f64,
    /// Counts over [0, 1] in equal bins.
    pub histogram: Vec<usize>,
    /// Sum of each ingredient's fraction over the round's recipes.
    pub composition: Vec<IngredientTotal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub round: usize,
    pub recipe_id: String,
    pub recipe: Recipe,
    pub breakdown: ScoreBreakdown,
    pub score: f64,
}

/// Humidity calibration of an array built from the two best recipes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub recipe_ids: [String; 2],
    pub training_grid: Vec<f64>,
    pub eval_grid: Vec<f64>,
    pub rmse_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub ingredients: Vec<ReportIngredient>,
    pub rounds: Vec<RoundStats>,
    pub best_so_far: Vec<f64>,
    pub top: Vec<ReportRecord>,
    pub records: Vec<ReportRecord>,
    pub calibration: Option<CalibrationSummary>,
}

/// `from, from + step, ...` up to and including `to`.
pub fn grid(from: f64, to: f64, step: f64) -> Vec<f64> {
    let n = ((to - from) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| from + step * i as f64).collect()
}

/// Summary of every completed round, the best-so-far series, the top
/// recipes and, when the world allows, a two-recipe calibration.
pub fn round_report(state: &CampaignState, config: &CampaignConfig) -> Result<Report, CampaignError> {
    let selection = state.selection.as_ref().ok_or(CampaignError::NoRounds)?;
    if state.completed_count() == 0 {
        return Err(CampaignError::NoRounds);
    }
    let ingredients: Vec<ReportIngredient> = selection
        .ingredients
        .iter()
        .map(|i| ReportIngredient { cas: i.cas.clone(), name: i.name.clone(), role: i.role })
        .collect();

    let rounds = state
        .completed_rounds()
        .map(|r| {
            let scores: Vec<f64> = r.results.iter().map(|e| e.score).collect();
            let n = scores.len();
            RoundStats {
                round: r.index,
                beta: r.beta,
                evaluations: n,
                max: scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                median: median(&scores).unwrap_or(0.0),
                near_zero_fraction: scores.iter().filter(|s| **s < NEAR_ZERO).count() as f64 / n.max(1) as f64,
                histogram: histogram(&scores, HISTOGRAM_BINS, 0.0, 1.0),
                composition: ingredients
                    .iter()
                    .map(|i| IngredientTotal {
                        cas: i.cas.clone(),
                        total: r.results.iter().map(|e| e.recipe.fraction(&i.cas)).sum(),
                    })
                    .collect(),
            }
        })
        .collect();

    let records: Vec<ReportRecord> = state
        .completed_rounds()
        .flat_map(|r| {
            r.results.iter().map(move |e| ReportRecord {
                round: r.index,
                recipe_id: e.recipe_id.clone(),
                recipe: e.recipe.clone(),
                breakdown: e.breakdown,
                score: e.score,
            })
        })
        .collect();
    let mut ranked: Vec<&ReportRecord> = records.iter().collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.recipe_id.cmp(&b.recipe_id)));
    let top: Vec<ReportRecord> = ranked.iter().take(config.report_top_n).map(|r| (*r).clone()).collect();

    let calibration = calibrate_top_two(&ranked, &config.world_model(), config.seed);

    Ok(Report { ingredients, rounds, best_so_far: state.best_so_far(), top, records, calibration })
}

fn calibrate_top_two(ranked: &[&ReportRecord], world: &WorldModel, seed: u64) -> Option<CalibrationSummary> {
    let first = ranked.first()?;
    let second = ranked.iter().skip(1).find(|r| r.recipe != first.recipe)?;
    let training_grid = grid(5.0, 95.0, 5.0);
    let eval_grid = grid(7.5, 92.5, 5.0);
    let noise_seed = derive(seed, "calibration", 0);
    let model = calibrate_array([&first.recipe, &second.recipe], world, &training_grid, noise_seed).ok()?;
    let rmse_percent = evaluate_rmse(&model, world, &eval_grid, derive(seed, "calibration", 1)).ok()?;
    Some(CalibrationSummary {
        recipe_ids: [first.recipe_id.clone(), second.recipe_id.clone()],
        training_grid,
        eval_grid,
        rmse_percent,
    })
}
