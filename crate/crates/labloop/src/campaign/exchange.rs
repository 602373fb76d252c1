use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use super::config::ExchangeMode;
use super::state::PlannedRecipe;
use super::CampaignError;

/// Handoff document for the lab platform: CAS codes and amounts per recipe.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExchangeFile {
    pub campaign: String,
    pub round: usize,
    pub mode: ExchangeMode,
    /// `fraction` or `uL`.
    pub unit: String,
    pub total: f64,
    pub recipes: Vec<ExchangeRecipe>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExchangeRecipe {
    pub recipe_id: String,
    pub substances: Vec<ExchangeSubstance>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExchangeSubstance {
    pub cas: String,
    /// Fixed six-decimal number.
    pub concentration: Box<RawValue>,
}

const DECIMALS: u32 = 6;
const SCALE: f64 = 1e6;

/// Splits `total_units` in proportion to `fractions` so the integer parts
/// add up exactly (largest remainder, ties to the earlier entry).
pub fn apportion(fractions: &[f64], total_units: u64) -> Vec<u64> {
    let sum: f64 = fractions.iter().sum();
    if fractions.is_empty() || !(sum > 0.0) {
        return vec![0; fractions.len()];
    }
    let exact: Vec<f64> = fractions.iter().map(|f| f / sum * total_units as f64).collect();
    let mut units: Vec<u64> = exact.iter().map(|x| x.floor() as u64).collect();
    let assigned: u64 = units.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().cycle().take(total_units.saturating_sub(assigned) as usize) {
        units[i] += 1;
    }
    units
}

fn fixed(units: u64) -> Box<RawValue> {
    let text =
        format!("{}.{:0width$}", units / 10u64.pow(DECIMALS), units % 10u64.pow(DECIMALS), width = DECIMALS as usize);
    RawValue::from_string(text).expect("decimal literal is valid JSON")
}

/// Compiles one round's batch. Every CAS must belong to `allowed`.
pub fn compile_exchange_file(
    campaign: &str,
    round: usize,
    batch: &[PlannedRecipe],
    allowed: &[String],
    mode: ExchangeMode,
    total_volume_ul: f64,
) -> Result<ExchangeFile, CampaignError> {
    let (unit, total) = match mode {
        ExchangeMode::Fraction => ("fraction", 1.0),
        ExchangeMode::Absolute => ("uL", total_volume_ul),
    };
    let total_units = (total * SCALE).round() as u64;
    let mut recipes = Vec::with_capacity(batch.len());
    for p in batch {
        if let Some(cas) = p.recipe.ingredients().find(|c| !allowed.iter().any(|a| a == c)) {
            return Err(CampaignError::InvalidSelection(format!(
                "recipe {} uses {cas}, which is not in the selected ingredient set",
                p.recipe_id
            )));
        }
        let units = apportion(&p.recipe.fractions(), total_units);
        recipes.push(ExchangeRecipe {
            recipe_id: p.recipe_id.clone(),
            substances: p
                .recipe
                .ingredients()
                .zip(units)
                .map(|(cas, u)| ExchangeSubstance { cas: cas.to_string(), concentration: fixed(u) })
                .collect(),
        });
    }
    Ok(ExchangeFile { campaign: campaign.to_string(), round, mode, unit: unit.into(), total, recipes })
}
