//! Uniform sampling on the probability simplex.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

/// Draws one uniform point on the `(d-1)`-simplex.
///
/// Normalized i.i.d. unit exponentials are Dirichlet(1, …, 1) distributed.
pub fn sample_point<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    let mut point: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = point.iter().sum();
    if total > 0.0 {
        point.iter_mut().for_each(|x| *x /= total);
    } else {
        point.iter_mut().for_each(|x| *x = 1.0 / d as f64);
    }
    point
}

/// `n` uniform points on the `(d-1)`-simplex, reproducible from `seed`.
pub fn sample_simplex(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sample_point(&mut rng, d)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimension_is_the_unit_point() {
        for p in sample_simplex(50, 1, 3) {
            assert_eq!(p, [1.0]);
        }
    }

    #[test]
    fn points_lie_on_simplex() {
        for p in sample_simplex(500, 8, 11) {
            assert!(p.iter().all(|x| *x >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn seed_determines_output() {
        assert_eq!(sample_simplex(20, 5, 42), sample_simplex(20, 5, 42));
        assert_ne!(sample_simplex(20, 5, 42), sample_simplex(20, 5, 43));
    }

    #[test]
    fn coordinate_means_match_one_over_d() {
        // Dirichlet(1,…,1) marginal: mean 1/d, variance (d-1)/(d²(d+1)).
        let (n, d) = (10_000usize, 8usize);
        let pts = sample_simplex(n, d, 2024);
        let var = (d as f64 - 1.0) / ((d * d) as f64 * (d as f64 + 1.0));
        let se = libm::sqrt(var / n as f64);
        for c in 0..d {
            let mean = pts.iter().map(|p| p[c]).sum::<f64>() / n as f64;
            assert!((mean - 1.0 / d as f64).abs() < 3.0 * se, "coord {c}: {mean}");
        }
    }
}
