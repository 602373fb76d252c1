use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{VirtlabError, WorldModel};
use crate::domain::Recipe;
use crate::linalg::{Matrix, Qr};
use crate::seed;

/// Three color channels for each of the two array spots.
pub const FEATURE_COUNT: usize = 6;
const MIN_LEVELS: usize = 6;
const DEFAULT_DEGREE: usize = 2;
/// Candidate ridge strengths, weakest first.
pub const RIDGE_GRID: &[f64] = &[1e-8, 1e-6, 1e-4, 1e-3, 1e-2, 3e-2, 1e-1, 3e-1, 1.0, 3.0];
const RANK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("training grid needs at least {MIN_LEVELS} distinct levels, got {0}")]
    TooFewLevels(usize),
    #[error("humidity level {0} outside [0, 100]")]
    LevelOutOfRange(f64),
    #[error("features carry no usable signal (design rank {0})")]
    RankDeficient(usize),
    #[error("degree must be at least 1")]
    BadDegree,
    #[error("empty evaluation grid")]
    EmptyGrid,
    #[error(transparent)]
    World(#[from] VirtlabError),
}

/// Polynomial map from the two-spot steady-state colors to %RH.
///
/// Features are standardized with the training statistics and expanded into
/// an intercept plus per-feature powers `z_k^p`, `p = 1..=degree`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    pub recipes: [Recipe; 2],
    pub degree: usize,
    pub ridge: f64,
    pub feature_mean: [f64; FEATURE_COUNT],
    pub feature_scale: [f64; FEATURE_COUNT],
    pub coefficients: Vec<f64>,
    pub training_grid: Vec<f64>,
}

/// Steady-state colors of both spots at `rh`, with the world's observation
/// noise drawn from a stream keyed by `(noise_seed, rh)`.
pub fn measure_features(
    pair: [&Recipe; 2],
    world: &WorldModel,
    rh: f64,
    noise_seed: u64,
) -> Result<[f64; FEATURE_COUNT], VirtlabError> {
    let mut f = [0.0; FEATURE_COUNT];
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(world.seed ^ noise_seed, "calibration", rh.to_bits()));
    for (spot, recipe) in pair.iter().enumerate() {
        let c = world.steady_color(recipe, rh)?;
        for ch in 0..3 {
            let noise = if world.noise_sigma > 0.0 {
                let z: f64 = StandardNormal.sample(&mut rng);
                world.noise_sigma * z
            } else {
                0.0
            };
            f[spot * 3 + ch] = (c[ch] + noise).clamp(0.0, 1.0);
        }
    }
    Ok(f)
}

fn expand(
    features: &[f64; FEATURE_COUNT],
    mean: &[f64; FEATURE_COUNT],
    scale: &[f64; FEATURE_COUNT],
    degree: usize,
) -> Vec<f64> {
    let mut row = Vec::with_capacity(1 + FEATURE_COUNT * degree);
    row.push(1.0);
    for p in 1..=degree {
        for k in 0..FEATURE_COUNT {
            let z = (features[k] - mean[k]) / scale[k];
            row.push(libm::pow(z, p as f64));
        }
    }
    row
}

/// Ridge least squares by QR on the augmented design. The intercept column
/// is left unpenalized.
fn solve_ridge(rows: &[Vec<f64>], target: &[f64], ridge: f64) -> Vec<f64> {
    let cols = rows[0].len();
    let lambda = libm::sqrt(ridge.max(0.0));
    let m = rows.len();
    let augmented = Matrix::from_fn(m + cols, cols, |i, j| {
        if i < m {
            rows[i][j]
        } else if i - m == j && j > 0 {
            lambda
        } else {
            0.0
        }
    });
    let mut rhs: Vec<f64> = target.to_vec();
    rhs.resize(m + cols, 0.0);
    Qr::new(&augmented).solve(&rhs)
}

fn check_levels(grid: &[f64]) -> Result<(), CalibrationError> {
    if let Some(bad) = grid.iter().find(|h| !(0.0..=100.0).contains(*h)) {
        return Err(CalibrationError::LevelOutOfRange(*bad));
    }
    Ok(())
}

/// Fits with degree 2, choosing the ridge from [`RIDGE_GRID`] by
/// leave-one-out error over the training levels.
pub fn calibrate_array(
    pair: [&Recipe; 2],
    world: &WorldModel,
    training_grid: &[f64],
    noise_seed: u64,
) -> Result<CalibrationModel, CalibrationError> {
    let mut best: Option<(f64, CalibrationModel)> = None;
    for &ridge in RIDGE_GRID {
        let model = calibrate_array_with(pair, world, training_grid, noise_seed, DEFAULT_DEGREE, ridge)?;
        let err = model.loo_error(world, noise_seed)?;
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, model));
        }
    }
    Ok(best.expect("ridge grid is not empty").1)
}

/// Ridge least-squares fit of %RH on expanded features, solved by QR on the
/// ridge-augmented design.
pub fn calibrate_array_with(
    pair: [&Recipe; 2],
    world: &WorldModel,
    training_grid: &[f64],
    noise_seed: u64,
    degree: usize,
    ridge: f64,
) -> Result<CalibrationModel, CalibrationError> {
    if degree == 0 {
        return Err(CalibrationError::BadDegree);
    }
    check_levels(training_grid)?;
    let mut distinct: Vec<f64> = training_grid.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < MIN_LEVELS {
        return Err(CalibrationError::TooFewLevels(distinct.len()));
    }

    let features: Vec<[f64; FEATURE_COUNT]> =
        training_grid.iter().map(|&rh| measure_features(pair, world, rh, noise_seed)).collect::<Result<_, _>>()?;
    let n = features.len() as f64;
    let mut mean = [0.0; FEATURE_COUNT];
    let mut scale = [0.0; FEATURE_COUNT];
    for k in 0..FEATURE_COUNT {
        mean[k] = features.iter().map(|f| f[k]).sum::<f64>() / n;
        let var = features.iter().map(|f| (f[k] - mean[k]) * (f[k] - mean[k])).sum::<f64>() / n;
        scale[k] = if var > 1e-24 { libm::sqrt(var) } else { 1.0 };
    }

    let rows: Vec<Vec<f64>> = features.iter().map(|f| expand(f, &mean, &scale, degree)).collect();
    let cols = rows[0].len();
    let design = Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]);
    let rank = Qr::new(&design).rank(RANK_TOLERANCE);
    if rank < 2 {
        return Err(CalibrationError::RankDeficient(rank));
    }

    let coefficients = solve_ridge(&rows, training_grid, ridge);

    Ok(CalibrationModel {
        recipes: [pair[0].clone(), pair[1].clone()],
        degree,
        ridge,
        feature_mean: mean,
        feature_scale: scale,
        coefficients,
        training_grid: training_grid.to_vec(),
    })
}

impl CalibrationModel {
    pub fn predict(&self, features: &[f64; FEATURE_COUNT]) -> f64 {
        expand(features, &self.feature_mean, &self.feature_scale, self.degree)
            .iter()
            .zip(&self.coefficients)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Predicted %RH for each level of `grid`, measured with `noise_seed`.
    pub fn predict_grid(
        &self,
        world: &WorldModel,
        grid: &[f64],
        noise_seed: u64,
    ) -> Result<Vec<f64>, CalibrationError> {
        let pair = [&self.recipes[0], &self.recipes[1]];
        grid.iter().map(|&rh| Ok(self.predict(&measure_features(pair, world, rh, noise_seed)?))).collect()
    }

    /// Summed squared leave-one-out error over the training levels, with the
    /// feature scaling held at the full-data statistics.
    fn loo_error(&self, world: &WorldModel, noise_seed: u64) -> Result<f64, CalibrationError> {
        let pair = [&self.recipes[0], &self.recipes[1]];
        let rows: Vec<Vec<f64>> = self
            .training_grid
            .iter()
            .map(|&rh| {
                let f = measure_features(pair, world, rh, noise_seed)?;
                Ok(expand(&f, &self.feature_mean, &self.feature_scale, self.degree))
            })
            .collect::<Result<_, CalibrationError>>()?;
        let mut sse = 0.0;
        for k in 0..rows.len() {
            let (r, t): (Vec<Vec<f64>>, Vec<f64>) = rows
                .iter()
                .zip(&self.training_grid)
                .enumerate()
                .filter(|(i, _)| *i != k)
                .map(|(_, (r, t))| (r.clone(), *t))
                .unzip();
            let c = solve_ridge(&r, &t, self.ridge);
            let p: f64 = rows[k].iter().zip(&c).map(|(a, b)| a * b).sum();
            sse += (p - self.training_grid[k]) * (p - self.training_grid[k]);
        }
        Ok(sse)
    }

    pub fn describe(&self) -> String {
        alloc::format!(
            "degree {} over {} features, ridge {:e}, {} levels",
            self.degree,
            FEATURE_COUNT,
            self.ridge,
            self.training_grid.len()
        )
    }
}

/// Root-mean-square prediction error in %RH over `eval_grid`.
///
/// Callers wanting a held-out score pass levels absent from the training
/// grid; overlap is allowed.
pub fn evaluate_rmse(
    calibration: &CalibrationModel,
    world: &WorldModel,
    eval_grid: &[f64],
    noise_seed: u64,
) -> Result<f64, CalibrationError> {
    if eval_grid.is_empty() {
        return Err(CalibrationError::EmptyGrid);
    }
    check_levels(eval_grid)?;
    let predicted = calibration.predict_grid(world, eval_grid, noise_seed)?;
    let sse: f64 = predicted.iter().zip(eval_grid).map(|(p, h)| (p - h) * (p - h)).sum();
    Ok(libm::sqrt(sse / eval_grid.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> [Recipe; 2] {
        let r1 = Recipe::from_fractions(
            ["7646-79-9", "7718-54-9", "25322-68-3", "9004-57-3", "67-63-0"],
            &[0.55, 0.08, 0.12, 0.10, 0.15],
        )
        .unwrap();
        let r2 = Recipe::from_fractions(
            ["7646-79-9", "10043-52-4", "25322-68-3", "9004-57-3", "67-63-0"],
            &[0.55, 0.08, 0.12, 0.10, 0.15],
        )
        .unwrap();
        [r1, r2]
    }

    fn grid(from: f64, to: f64, step: f64) -> Vec<f64> {
        let mut g = Vec::new();
        let mut h = from;
        while h <= to + 1e-9 {
            g.push(h);
            h += step;
        }
        g
    }

    #[test]
    fn noise_free_interpolation_is_tight() {
        let w = WorldModel::reference().noise_free();
        let [a, b] = pair();
        let cal = calibrate_array([&a, &b], &w, &grid(5.0, 95.0, 5.0), 0).unwrap();
        assert!(evaluate_rmse(&cal, &w, &[50.0], 0).unwrap() <= 0.5);
        assert!(evaluate_rmse(&cal, &w, &grid(7.5, 92.5, 5.0), 0).unwrap() <= 0.5);
    }

    #[test]
    fn noisy_features_pull_the_ridge_up() {
        let [a, b] = pair();
        let train = grid(5.0, 95.0, 5.0);
        let clean = calibrate_array([&a, &b], &WorldModel::reference().noise_free(), &train, 0).unwrap();
        let mut w = WorldModel::reference();
        w.noise_sigma = 5e-3;
        let noisy = calibrate_array([&a, &b], &w, &train, 3).unwrap();
        assert!(noisy.ridge > clean.ridge);
        assert!(RIDGE_GRID.contains(&noisy.ridge));
        let fixed = calibrate_array_with([&a, &b], &w, &train, 3, 2, noisy.ridge).unwrap();
        assert_eq!(fixed, noisy);
    }

    #[test]
    fn too_few_levels() {
        let w = WorldModel::reference().noise_free();
        let [a, b] = pair();
        assert_eq!(
            calibrate_array([&a, &b], &w, &[5.0, 20.0, 40.0, 60.0, 80.0, 80.0], 0),
            Err(CalibrationError::TooFewLevels(5))
        );
    }

    #[test]
    fn inert_pair_is_rank_deficient() {
        let w = WorldModel::reference().noise_free();
        let inert = Recipe::from_fractions(["67-63-0"], &[1.0]).unwrap();
        assert!(matches!(
            calibrate_array([&inert, &inert], &w, &grid(5.0, 95.0, 10.0), 0),
            Err(CalibrationError::RankDeficient(1))
        ));
    }
}
