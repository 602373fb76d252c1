use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{VirtlabError, WorldModel};
use crate::domain::{Recipe, ResponseCurve, RhProgram};
use crate::seed;

/// Simulates the color trace of `recipe` under `program`.
///
/// The spot starts equilibrated at the first step's humidity. Within each
/// step every channel relaxes exponentially toward that step's equilibrium
/// with the recipe's time constant. On steps below the highest humidity seen
/// so far, the target keeps `1 − r` of the peak excursion, where `r` is the
/// recipe's reversibility. Gaussian noise is added per sample and channel,
/// then colors are clamped to `[0, 1]`. Identical inputs give identical
/// curves.
pub fn simulate_curve(
    recipe: &Recipe,
    program: &RhProgram,
    world: &WorldModel,
    seed: u64,
) -> Result<ResponseCurve, VirtlabError> {
    program.validate()?;
    let mix = world.mixture(recipe)?;
    let n = program.sample_count();
    let dt = program.sample_dt_s;

    let steps: Vec<_> = program.exposed_steps().copied().collect();
    let mut peak_rh = steps[0].rh_percent;
    let peak_equilibrium = |rh: f64| world.equilibrium(&mix, rh);
    let mut state = peak_equilibrium(peak_rh);

    let mut t = Vec::with_capacity(n);
    let mut color = Vec::with_capacity(n);
    let mut step_start = 0.0;
    let mut k = 0usize;
    for step in &steps {
        let here = peak_equilibrium(step.rh_percent);
        let target = if step.rh_percent >= peak_rh {
            peak_rh = step.rh_percent;
            here
        } else {
            let peak = peak_equilibrium(peak_rh);
            let keep = 1.0 - mix.reversibility;
            [0, 1, 2].map(|c| here[c] + keep * (peak[c] - here[c]))
        };
        let step_end = step_start + step.duration_s;
        while k < n && (k as f64) * dt < step_end {
            let tk = k as f64 * dt;
            let decay = libm::exp(-(tk - step_start) / mix.tau_s);
            t.push(tk);
            color.push([0, 1, 2].map(|c| target[c] + (state[c] - target[c]) * decay));
            k += 1;
        }
        let decay = libm::exp(-step.duration_s / mix.tau_s);
        state = [0, 1, 2].map(|c| target[c] + (state[c] - target[c]) * decay);
        step_start = step_end;
    }

    if world.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(world.seed, "curve", seed));
        for c in &mut color {
            for v in c.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += world.noise_sigma * z;
            }
        }
    }
    for c in &mut color {
        for v in c.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
    }

    Ok(ResponseCurve { recipe_id: String::new(), program_id: program.id.clone(), t, color })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::RhStep;
    use alloc::vec;

    fn recipe(pairs: &[(&str, f64)]) -> Recipe {
        let keys: Vec<&str> = pairs.iter().map(|p| p.0).collect();
        let fr: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        Recipe::from_fractions(keys, &fr).unwrap()
    }

    #[test]
    fn solvent_only_is_flat_at_baseline() {
        let w = WorldModel::reference().noise_free();
        let c = simulate_curve(&recipe(&[("67-63-0", 1.0)]), &RhProgram::default(), &w, 1).unwrap();
        assert_eq!(c.t.len(), 420);
        assert!(c.color.iter().all(|x| *x == w.baseline));
    }

    #[test]
    fn trailing_zero_length_step_changes_nothing() {
        let w = WorldModel::reference();
        let r = recipe(&[("7646-79-9", 0.5), ("67-63-0", 0.5)]);
        let p = RhProgram::default();
        let mut q = p.clone();
        q.steps.push(RhStep { rh_percent: 5.0, duration_s: 0.0 });
        assert_eq!(simulate_curve(&r, &p, &w, 3).unwrap(), simulate_curve(&r, &q, &w, 3).unwrap());
    }

    #[test]
    fn single_step_follows_first_order_closed_form() {
        let w = WorldModel::reference().noise_free();
        let r = recipe(&[("7646-79-9", 0.4), ("67-63-0", 0.6)]);
        let program = RhProgram {
            id: "step".into(),
            steps: vec![
                RhStep { rh_percent: 5.0, duration_s: 10.0 },
                RhStep { rh_percent: 80.0, duration_s: 100.0 },
                RhStep { rh_percent: 5.0, duration_s: 10.0 },
            ],
            sample_dt_s: 0.5,
        };
        let curve = simulate_curve(&r, &program, &w, 0).unwrap();
        let tau = w.time_constant(&r).unwrap();
        let start = w.steady_color(&r, 5.0).unwrap();
        let end = w.steady_color(&r, 80.0).unwrap();
        for (t, c) in curve.t.iter().zip(&curve.color) {
            if *t < 10.0 || *t >= 110.0 {
                continue;
            }
            let grow = 1.0 - libm::exp(-(t - 10.0) / tau);
            for ch in 0..3 {
                let expected = (end[ch] - start[ch]) * grow;
                assert!((c[ch] - start[ch] - expected).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn same_seed_same_curve() {
        let w = WorldModel::reference();
        let r = recipe(&[("7646-79-9", 0.3), ("75-58-1", 0.2), ("67-63-0", 0.5)]);
        let a = simulate_curve(&r, &RhProgram::default(), &w, 17).unwrap();
        let b = simulate_curve(&r, &RhProgram::default(), &w, 17).unwrap();
        let c = simulate_curve(&r, &RhProgram::default(), &w, 18).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.color.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    }
}
