use alloc::vec::Vec;
use core::ops::Range;

use thiserror::Error;

use crate::domain::{ResponseCurve, RhProgram, ScoreBreakdown};

/// Amplitude below which a curve counts as flat.
const DEGENERATE_AMPLITUDE: f64 = 1e-9;
/// Fraction of a step averaged to estimate its plateau.
const PLATEAU_FRACTION: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("curve has {curve} samples but the program implies {program}")]
    Misaligned { curve: usize, program: usize },
    /// The curve barely moves. Carries the fallback breakdown: response time
    /// equal to the program duration and zero reversibility.
    #[error("flat curve (amplitude {})", .0.amplitude)]
    DegenerateCurve(ScoreBreakdown),
}

impl MetricsError {
    /// The breakdown to score with, if any.
    pub fn fallback(&self) -> Option<ScoreBreakdown> {
        match self {
            MetricsError::DegenerateCurve(b) => Some(*b),
            MetricsError::Misaligned { .. } => None,
        }
    }
}

struct Segment {
    rh: f64,
    start_s: f64,
    samples: Range<usize>,
}

fn segments(program: &RhProgram, n: usize) -> Vec<Segment> {
    let dt = program.sample_dt_s;
    let mut out = Vec::new();
    let mut start_s = 0.0;
    let mut k = 0usize;
    for step in program.exposed_steps() {
        let end_s = start_s + step.duration_s;
        let first = k;
        while k < n && (k as f64) * dt < end_s {
            k += 1;
        }
        if k > first {
            out.push(Segment { rh: step.rh_percent, start_s, samples: first..k });
        }
        start_s = end_s;
    }
    out
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    libm::sqrt((0..3).map(|c| (a[c] - b[c]) * (a[c] - b[c])).sum())
}

fn plateau(color: &[[f64; 3]], samples: &Range<usize>) -> [f64; 3] {
    let len = samples.len();
    let take = (len / PLATEAU_FRACTION).max(1);
    let tail = &color[samples.end - take..samples.end];
    let mut m = [0.0; 3];
    for c in tail {
        for ch in 0..3 {
            m[ch] += c[ch];
        }
    }
    m.map(|v| v / take as f64)
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

/// Computes amplitude, t90 response time, reversibility and sensitivity.
///
/// Step plateaus are the mean of the last tenth of each step. Amplitude is
/// the largest plateau distance from the first plateau; response time is the
/// t90 of the step with the largest plateau-to-plateau change;
/// reversibility compares the final plateau with the first; sensitivity is
/// the least-squares slope of plateau distance against %RH.
pub fn extract_metrics(curve: &ResponseCurve, program: &RhProgram) -> Result<ScoreBreakdown, MetricsError> {
    let expected = program.sample_count();
    if curve.color.len() != expected || curve.t.len() != expected || expected == 0 {
        return Err(MetricsError::Misaligned { curve: curve.color.len(), program: expected });
    }
    let segs = segments(program, expected);
    let plateaus: Vec<[f64; 3]> = segs.iter().map(|s| plateau(&curve.color, &s.samples)).collect();
    let base = plateaus[0];
    let dists: Vec<f64> = plateaus.iter().map(|p| distance(p, &base)).collect();
    let amplitude = dists.iter().copied().fold(0.0, f64::max);
    let rhs: Vec<f64> = segs.iter().map(|s| s.rh).collect();
    let sensitivity = slope(&rhs, &dists);
    let duration = program.total_duration_s();

    if amplitude < DEGENERATE_AMPLITUDE {
        return Err(MetricsError::DegenerateCurve(ScoreBreakdown {
            amplitude,
            response_time_s: duration,
            reversibility: 0.0,
            sensitivity,
            score: None,
        }));
    }

    let mut largest: Option<(usize, f64)> = None;
    for j in 1..segs.len() {
        let change = distance(&plateaus[j], &plateaus[j - 1]);
        if largest.is_none_or(|(_, best)| change > best) {
            largest = Some((j, change));
        }
    }
    let response_time_s = match largest {
        Some((j, change)) if change > 0.0 => {
            let seg = &segs[j];
            let from = plateaus[j - 1];
            seg.samples
                .clone()
                .find(|&k| distance(&curve.color[k], &from) >= 0.9 * change)
                .map_or(seg.samples.len() as f64 * program.sample_dt_s, |k| curve.t[k] - seg.start_s)
        }
        _ => duration,
    }
    .min(duration);

    let residual = distance(&plateaus[plateaus.len() - 1], &base);
    let reversibility = (1.0 - residual / amplitude).clamp(0.0, 1.0);

    Ok(ScoreBreakdown { amplitude, response_time_s, reversibility, sensitivity, score: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::RhStep;
    use alloc::string::String;
    use alloc::vec;

    fn program(levels: &[f64], dur: f64, dt: f64) -> RhProgram {
        RhProgram {
            id: String::from("t"),
            steps: levels.iter().map(|&rh_percent| RhStep { rh_percent, duration_s: dur }).collect(),
            sample_dt_s: dt,
        }
    }

    /// First-order response built independently of the simulator: flat, then
    /// `c(t) = a·(1 − e^{−t/τ})` toward `end`, then back with the same law.
    fn closed_form(p: &RhProgram, levels: &[[f64; 3]], tau: f64) -> ResponseCurve {
        let n = p.sample_count();
        let dt = p.sample_dt_s;
        let dur = p.steps[0].duration_s;
        let mut t = vec![];
        let mut color = vec![];
        let mut state = levels[0];
        for (j, target) in levels.iter().enumerate() {
            let start_state = state;
            for i in 0..(dur / dt) as usize {
                let tk = j as f64 * dur + i as f64 * dt;
                if t.len() == n {
                    break;
                }
                let s = tk - j as f64 * dur;
                let e = libm::exp(-s / tau);
                t.push(tk);
                color.push([0, 1, 2].map(|c| target[c] + (start_state[c] - target[c]) * e));
            }
            let e = libm::exp(-dur / tau);
            state = [0, 1, 2].map(|c| target[c] + (start_state[c] - target[c]) * e);
        }
        ResponseCurve { recipe_id: String::new(), program_id: String::new(), t, color }
    }

    #[test]
    fn flat_curve_takes_degenerate_path() {
        let p = program(&[5.0, 50.0, 5.0], 60.0, 1.0);
        let c = closed_form(&p, &[[0.5; 3], [0.5; 3], [0.5; 3]], 5.0);
        let err = extract_metrics(&c, &p).unwrap_err();
        let b = err.fallback().unwrap();
        assert_eq!(b.amplitude, 0.0);
        assert_eq!(b.response_time_s, 180.0);
        assert_eq!(b.reversibility, 0.0);
    }

    #[test]
    fn t90_matches_tau_ln10() {
        let tau = 7.3;
        let p = program(&[5.0, 80.0, 5.0], 200.0, 0.5);
        let lo = [0.3, 0.4, 0.7];
        let hi = [0.7, 0.35, 0.3];
        let c = closed_form(&p, &[lo, hi, lo], tau);
        let b = extract_metrics(&c, &p).unwrap();
        let t90 = tau * core::f64::consts::LN_10;
        assert!((b.response_time_s - t90).abs() <= p.sample_dt_s, "{} vs {t90}", b.response_time_s);
    }

    #[test]
    fn full_recovery_gives_unit_reversibility() {
        let p = program(&[5.0, 60.0, 95.0, 5.0], 100.0, 1.0);
        let lo = [0.3, 0.4, 0.7];
        let c = closed_form(&p, &[lo, [0.5, 0.4, 0.5], [0.8, 0.35, 0.3], lo], 3.0);
        let b = extract_metrics(&c, &p).unwrap();
        assert!((b.reversibility - 1.0).abs() < 1e-6);
        assert!(b.sensitivity > 0.0);
        assert!(b.response_time_s <= p.total_duration_s());
    }

    #[test]
    fn misaligned_curve_is_rejected() {
        let p = program(&[5.0, 50.0, 5.0], 60.0, 1.0);
        let mut c = closed_form(&p, &[[0.5; 3], [0.6; 3], [0.5; 3]], 5.0);
        c.t.pop();
        c.color.pop();
        assert!(matches!(extract_metrics(&c, &p), Err(MetricsError::Misaligned { .. })));
    }
}
