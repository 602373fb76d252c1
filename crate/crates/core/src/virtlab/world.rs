use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::VirtlabError;
use crate::domain::Recipe;

/// Humidity response parameters of one ingredient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngredientResponse {
    pub cas: String,
    pub name: String,
    /// Full-saturation color shift per unit fraction, per channel.
    pub gains: [f64; 3],
    /// Humidity (%RH) at half response.
    pub h50: f64,
    /// Logistic width in %RH.
    pub steepness: f64,
    /// Additive term in `ln τ` per unit fraction.
    pub kinetic: f64,
    /// Lost recovery per unit fraction; negative values aid recovery.
    pub hysteresis: f64,
}

/// Scales `target`'s gains by `1 + coefficient · x_partner` (floored at 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub target: String,
    pub partner: String,
    pub coefficient: f64,
}

/// The simulated chemistry. Serialized as `world.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldModel {
    /// Dry color before any colorant response.
    pub baseline: [f64; 3],
    pub tau0_s: f64,
    /// Observation noise standard deviation per channel.
    pub noise_sigma: f64,
    pub seed: u64,
    pub ingredients: Vec<IngredientResponse>,
    #[serde(default)]
    pub interactions: Vec<Interaction>,
}

/// Ingredient fractions resolved against a world, plus derived kinetics.
pub(crate) struct Mixture {
    /// Per world ingredient: `x_i · gain_i · interaction multiplier`.
    pub weighted_gains: Vec<[f64; 3]>,
    pub tau_s: f64,
    pub reversibility: f64,
}

fn logistic(h: f64, h50: f64, steepness: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-(h - h50) / steepness))
}

impl WorldModel {
    /// Eight-ingredient humidity world: cobalt(II) chloride is the one strongly
    /// beneficial colorant; nickel(II) bromide, calcium chloride and
    /// tetramethylammonium iodide slow the response and hurt recovery.
    pub fn reference() -> WorldModel {
        let ing = |cas: &str, name: &str, gains, h50, steepness, kinetic, hysteresis| IngredientResponse {
            cas: cas.to_string(),
            name: name.to_string(),
            gains,
            h50,
            steepness,
            kinetic,
            hysteresis,
        };
        WorldModel {
            baseline: [0.30, 0.40, 0.75],
            tau0_s: 8.0,
            noise_sigma: 0.002,
            seed: 0x5EED,
            ingredients: vec![
                ing("7646-79-9", "Cobalt(II) chloride", [0.55, -0.05, -0.45], 45.0, 16.0, 0.0, 0.0),
                ing("7718-54-9", "Nickel(II) iodide", [0.30, 0.15, -0.20], 20.0, 9.0, 0.2, 0.1),
                ing("13462-88-9", "Nickel (II) bromide", [0.06, 0.04, -0.02], 60.0, 10.0, 1.0, 0.8),
                ing("10043-52-4", "Calcium chloride", [0.10, 0.12, 0.02], 78.0, 8.0, 2.0, 1.2),
                ing("75-58-1", "Tetramethylammonium iodide", [0.02, 0.0, 0.0], 50.0, 10.0, 1.0, 0.9),
                ing("25322-68-3", "Polyethylene glycol", [0.0; 3], 50.0, 10.0, -1.5, 0.1),
                ing("9004-57-3", "Ethyl cellulose", [0.0; 3], 50.0, 10.0, 0.5, -0.6),
                ing("67-63-0", "Isopropanol", [0.0; 3], 50.0, 10.0, 0.0, 0.0),
            ],
            interactions: vec![
                Interaction { target: "7718-54-9".to_string(), partner: "75-58-1".to_string(), coefficient: 2.0 },
                Interaction { target: "7646-79-9".to_string(), partner: "10043-52-4".to_string(), coefficient: -1.5 },
                Interaction { target: "7646-79-9".to_string(), partner: "13462-88-9".to_string(), coefficient: -1.0 },
            ],
        }
    }

    /// The same world with observation noise switched off.
    pub fn noise_free(mut self) -> WorldModel {
        self.noise_sigma = 0.0;
        self
    }

    pub fn ingredient(&self, cas: &str) -> Option<&IngredientResponse> {
        self.ingredients.iter().find(|i| i.cas == cas)
    }

    /// CAS code of the ingredient with the largest color gain.
    pub fn beneficial_colorant(&self) -> Option<&str> {
        self.ingredients
            .iter()
            .map(|i| (i, i.gains.iter().map(|g| g * g).sum::<f64>()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i.cas.as_str())
    }

    fn fractions(&self, recipe: &Recipe) -> Result<Vec<f64>, VirtlabError> {
        let mut x = vec![0.0; self.ingredients.len()];
        for (cas, fraction) in recipe.iter() {
            let idx = self
                .ingredients
                .iter()
                .position(|i| i.cas == cas)
                .ok_or_else(|| VirtlabError::UnknownIngredient(cas.to_string()))?;
            x[idx] += fraction;
        }
        Ok(x)
    }

    pub(crate) fn mixture(&self, recipe: &Recipe) -> Result<Mixture, VirtlabError> {
        let x = self.fractions(recipe)?;
        let mut multiplier = vec![1.0; self.ingredients.len()];
        for inter in &self.interactions {
            let (Some(t), Some(p)) = (
                self.ingredients.iter().position(|i| i.cas == inter.target),
                self.ingredients.iter().position(|i| i.cas == inter.partner),
            ) else {
                continue;
            };
            multiplier[t] *= (1.0 + inter.coefficient * x[p]).max(0.0);
        }
        let weighted_gains = self
            .ingredients
            .iter()
            .enumerate()
            .map(|(i, ing)| {
                let w = x[i] * multiplier[i];
                [ing.gains[0] * w, ing.gains[1] * w, ing.gains[2] * w]
            })
            .collect();
        let log_tau: f64 = self.ingredients.iter().zip(&x).map(|(i, f)| i.kinetic * f).sum();
        let loss: f64 = self.ingredients.iter().zip(&x).map(|(i, f)| i.hysteresis * f).sum();
        Ok(Mixture {
            weighted_gains,
            tau_s: self.tau0_s * libm::exp(log_tau),
            reversibility: (1.0 - loss).clamp(0.0, 1.0),
        })
    }

    /// Equilibrium color at humidity `rh` before clamping.
    pub(crate) fn equilibrium(&self, mixture: &Mixture, rh: f64) -> [f64; 3] {
        let mut c = self.baseline;
        for (ing, g) in self.ingredients.iter().zip(&mixture.weighted_gains) {
            let s = logistic(rh, ing.h50, ing.steepness);
            for ch in 0..3 {
                c[ch] += g[ch] * s;
            }
        }
        c
    }

    /// Noise-free equilibrium color of `recipe` at `rh`, clamped to `[0, 1]`.
    pub fn steady_color(&self, recipe: &Recipe, rh: f64) -> Result<[f64; 3], VirtlabError> {
        let m = self.mixture(recipe)?;
        Ok(self.equilibrium(&m, rh).map(|v| v.clamp(0.0, 1.0)))
    }

    /// Response time constant of `recipe` in seconds.
    pub fn time_constant(&self, recipe: &Recipe) -> Result<f64, VirtlabError> {
        Ok(self.mixture(recipe)?.tau_s)
    }

    /// Fraction of the peak excursion `recipe` recovers on the way down.
    pub fn reversibility(&self, recipe: &Recipe) -> Result<f64, VirtlabError> {
        Ok(self.mixture(recipe)?.reversibility)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_world_has_one_beneficial_and_several_detrimental_ingredients() {
        let w = WorldModel::reference();
        assert!(w.tau0_s > 0.0 && w.noise_sigma >= 0.0);
        assert_eq!(w.beneficial_colorant(), Some("7646-79-9"));
        let detrimental = w.ingredients.iter().filter(|i| i.hysteresis > 0.5 && i.kinetic > 0.5).count();
        assert!(detrimental >= 2);
    }

    #[test]
    fn unknown_ingredient_is_reported() {
        let w = WorldModel::reference();
        let r = Recipe::from_fractions(["64-17-5"], &[1.0]).unwrap();
        assert_eq!(w.steady_color(&r, 50.0).unwrap_err(), VirtlabError::UnknownIngredient("64-17-5".to_string()));
    }
}
