//! Shared vocabulary: mined substances, recipes on the composition simplex,
//! humidity programs, response curves and score breakdowns.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::sig;

/// Tolerance on `Σ fractions = 1` for a valid recipe.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("composition sums to zero")]
    AllZero,
    #[error("negative or non-finite amount {value} for {cas}")]
    InvalidAmount { cas: String, value: f64 },
    #[error("ingredient {0} listed twice")]
    DuplicateIngredient(String),
    #[error("fractions sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("empty composition")]
    Empty,
    #[error("invalid humidity program: {0}")]
    InvalidProgram(&'static str),
}

/// Functional role of a substance in a formulation.
///
/// Variant order is the tie-break order used by role voting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Colorant,
    Additive,
    Solvent,
    Reactor,
    Adjuster,
}

impl Role {
    pub const ALL: [Role; 5] = [Role::Colorant, Role::Additive, Role::Solvent, Role::Reactor, Role::Adjuster];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Colorant => "colorant",
            Role::Additive => "additive",
            Role::Solvent => "solvent",
            Role::Reactor => "reactor",
            Role::Adjuster => "adjuster",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        Role::ALL.into_iter().find(|r| r.as_str().eq_ignore_ascii_case(s.trim()))
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A mined candidate reagent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstanceRecord {
    pub cas: String,
    pub name: String,
    pub role: Role,
    pub purpose: String,
    #[serde(with = "sig::fraction")]
    pub relevance: f64,
    #[serde(default)]
    pub sources: Vec<String>,
}

/// Article metadata as returned by retrieval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleRecord {
    pub id: String,
    pub title: String,
    pub r#abstract: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fulltext: Option<String>,
    #[serde(default, with = "sig::opt_fraction", skip_serializing_if = "Option::is_none")]
    pub relevance: Option<f64>,
}

/// Anything carrying a relevance fraction in `[0, 1]`.
pub trait Scored {
    fn relevance(&self) -> Option<f64>;
}

impl Scored for SubstanceRecord {
    fn relevance(&self) -> Option<f64> {
        Some(self.relevance)
    }
}

impl Scored for ArticleRecord {
    fn relevance(&self) -> Option<f64> {
        self.relevance
    }
}

/// Keeps the items whose relevance is at least `threshold`, in input order.
///
/// Items without a relevance value never pass.
pub fn filter_relevant<T: Scored + Clone>(items: &[T], threshold: f64) -> Vec<T> {
    items.iter().filter(|item| item.relevance().is_some_and(|r| r >= threshold)).cloned().collect()
}

/// A point on the fixed-total composition simplex, keyed by CAS code.
///
/// Key order is significant: it is the ingredient order of the campaign and
/// the coordinate order seen by the optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct Recipe {
    components: Vec<(String, f64)>,
}

impl Recipe {
    /// Builds a recipe from fractions that already lie on the simplex.
    pub fn from_fractions<I, S>(ingredients: I, fractions: &[f64]) -> Result<Recipe, DomainError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let keys: Vec<String> = ingredients.into_iter().map(Into::into).collect();
        if keys.is_empty() || keys.len() != fractions.len() {
            return Err(DomainError::Empty);
        }
        let components: Vec<(String, f64)> = keys.into_iter().zip(fractions.iter().copied()).collect();
        check_components(&components)?;
        let total: f64 = fractions.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(DomainError::NotNormalized(total));
        }
        Ok(Recipe { components })
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn ingredients(&self) -> impl Iterator<Item = &str> {
        self.components.iter().map(|(k, _)| k.as_str())
    }

    pub fn fractions(&self) -> Vec<f64> {
        self.components.iter().map(|(_, v)| *v).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.components.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Fraction of `cas`, zero when absent.
    pub fn fraction(&self, cas: &str) -> f64 {
        self.components.iter().find(|(k, _)| k == cas).map_or(0.0, |(_, v)| *v)
    }

    /// The recipe as it reads back from its canonical JSON form
    /// (fractions at nine significant digits). The largest fraction absorbs
    /// the rounding residue so the sum stays within [`SIMPLEX_TOLERANCE`].
    pub fn quantized(&self) -> Recipe {
        let q = |v: f64| sig::round_significant(v, sig::FRACTION_DIGITS);
        let mut components: Vec<(String, f64)> = self.components.iter().map(|(k, v)| (k.clone(), q(*v))).collect();
        let largest = components
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then_with(|| b.0.cmp(&a.0)))
            .map(|(i, _)| i);
        if let Some(i) = largest {
            let rest: f64 = components.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, (_, v))| *v).sum();
            components[i].1 = q((1.0 - rest).max(0.0));
        }
        Recipe { components }
    }
}

fn check_components(components: &[(String, f64)]) -> Result<(), DomainError> {
    for (i, (cas, value)) in components.iter().enumerate() {
        if !value.is_finite() || *value < 0.0 {
            return Err(DomainError::InvalidAmount { cas: cas.clone(), value: *value });
        }
        if components[..i].iter().any(|(k, _)| k == cas) {
            return Err(DomainError::DuplicateIngredient(cas.clone()));
        }
    }
    Ok(())
}

/// Scales nonnegative raw amounts onto the unit simplex, keeping their
/// proportions and key order.
pub fn normalize_recipe(raw: &[(String, f64)]) -> Result<Recipe, DomainError> {
    if raw.is_empty() {
        return Err(DomainError::Empty);
    }
    check_components(raw)?;
    let total: f64 = raw.iter().map(|(_, v)| *v).sum();
    if total <= 0.0 {
        return Err(DomainError::AllZero);
    }
    Ok(Recipe { components: raw.iter().map(|(k, v)| (k.clone(), v / total)).collect() })
}

impl Serialize for Recipe {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.components.len()))?;
        for (k, v) in &self.components {
            map.serialize_entry(k, &sig::round_significant(*v, sig::FRACTION_DIGITS))?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Recipe {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Recipe, D::Error> {
        struct RecipeVisitor;

        impl<'de> Visitor<'de> for RecipeVisitor {
            type Value = Recipe;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map from CAS code to mass fraction")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Recipe, A::Error> {
                let mut components = Vec::new();
                while let Some((k, v)) = access.next_entry::<String, f64>()? {
                    components.push((k, v));
                }
                let keys: Vec<&str> = components.iter().map(|(k, _)| k.as_str()).collect();
                let fractions: Vec<f64> = components.iter().map(|(_, v)| *v).collect();
                Recipe::from_fractions(keys, &fractions).map_err(serde::de::Error::custom)
            }
        }

        d.deserialize_map(RecipeVisitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhStep {
    pub rh_percent: f64,
    pub duration_s: f64,
}

/// A humidity exposure schedule. The first and last exposed steps sit at the
/// lowest humidity so recovery can be measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhProgram {
    #[serde(default = "default_program_id")]
    pub id: String,
    pub steps: Vec<RhStep>,
    pub sample_dt_s: f64,
}

fn default_program_id() -> String {
    String::from("default")
}

impl Default for RhProgram {
    /// 5 % baseline, rising through 20/40/60/80/95 %, back to 5 %;
    /// 60 s per step sampled every second.
    fn default() -> Self {
        let levels = [5.0, 20.0, 40.0, 60.0, 80.0, 95.0, 5.0];
        RhProgram {
            id: default_program_id(),
            steps: levels.iter().map(|&rh_percent| RhStep { rh_percent, duration_s: 60.0 }).collect(),
            sample_dt_s: 1.0,
        }
    }
}

impl RhProgram {
    pub fn validate(&self) -> Result<(), DomainError> {
        if !(self.sample_dt_s > 0.0 && self.sample_dt_s.is_finite()) {
            return Err(DomainError::InvalidProgram("sample_dt_s must be positive"));
        }
        for step in &self.steps {
            if !(0.0..=100.0).contains(&step.rh_percent) {
                return Err(DomainError::InvalidProgram("rh_percent outside [0, 100]"));
            }
            if !(step.duration_s >= 0.0 && step.duration_s.is_finite()) {
                return Err(DomainError::InvalidProgram("negative step duration"));
            }
        }
        let exposed: Vec<&RhStep> = self.exposed_steps().collect();
        let (Some(first), Some(last)) = (exposed.first(), exposed.last()) else {
            return Err(DomainError::InvalidProgram("program has no exposed step"));
        };
        let lowest = exposed.iter().map(|s| s.rh_percent).fold(f64::INFINITY, f64::min);
        if first.rh_percent != lowest || last.rh_percent != lowest {
            return Err(DomainError::InvalidProgram("first and last steps must be at the baseline humidity"));
        }
        if self.sample_count() == 0 {
            return Err(DomainError::InvalidProgram("program shorter than one sample"));
        }
        Ok(())
    }

    /// Steps with positive duration. Zero-length steps expose nothing.
    pub fn exposed_steps(&self) -> impl Iterator<Item = &RhStep> {
        self.steps.iter().filter(|s| s.duration_s > 0.0)
    }

    pub fn total_duration_s(&self) -> f64 {
        self.steps.iter().map(|s| s.duration_s).sum()
    }

    /// `floor(total_duration / dt)`.
    pub fn sample_count(&self) -> usize {
        libm::floor(self.total_duration_s() / self.sample_dt_s + 1e-9) as usize
    }

    pub fn baseline_rh(&self) -> f64 {
        self.exposed_steps().map(|s| s.rh_percent).fold(f64::INFINITY, f64::min)
    }
}

/// Simulated color-vs-time trace of one sensing spot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseCurve {
    pub recipe_id: String,
    pub program_id: String,
    pub t: Vec<f64>,
    pub color: Vec<[f64; 3]>,
}

/// The four curve metrics and the weighted score derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub amplitude: f64,
    pub response_time_s: f64,
    pub reversibility: f64,
    pub sensitivity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn keyed(values: &[f64]) -> Vec<(String, f64)> {
        values.iter().enumerate().map(|(i, v)| (alloc::format!("{}-00-0", 10 + i), *v)).collect()
    }

    #[test]
    fn uniform_amounts_normalize_to_eighths() {
        let r = normalize_recipe(&keyed(&[1.0; 8])).unwrap();
        assert!(r.fractions().iter().all(|f| *f == 0.125));
    }

    #[test]
    fn single_component_takes_everything() {
        let r = normalize_recipe(&keyed(&[2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(r.fractions(), vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn all_zero_is_rejected() {
        assert_eq!(normalize_recipe(&keyed(&[0.0; 8])), Err(DomainError::AllZero));
    }

    #[test]
    fn negative_and_duplicate_entries_are_rejected() {
        assert!(matches!(normalize_recipe(&keyed(&[1.0, -0.5])), Err(DomainError::InvalidAmount { .. })));
        let dup = vec![(String::from("a"), 1.0), (String::from("a"), 2.0)];
        assert!(matches!(normalize_recipe(&dup), Err(DomainError::DuplicateIngredient(_))));
    }

    #[test]
    fn recipe_json_keeps_key_order_and_nine_digits() {
        let raw = vec![(String::from("67-63-0"), 2.0), (String::from("7646-79-9"), 1.0)];
        let r = normalize_recipe(&raw).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(json, r#"{"67-63-0":0.666666667,"7646-79-9":0.333333333}"#);
        let back: Recipe = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r.quantized());
    }

    #[test]
    fn default_program_is_valid() {
        let p = RhProgram::default();
        p.validate().unwrap();
        assert_eq!(p.sample_count(), 420);
        assert_eq!(p.baseline_rh(), 5.0);
    }

    #[test]
    fn program_must_return_to_baseline() {
        let mut p = RhProgram::default();
        p.steps.pop();
        assert!(p.validate().is_err());
    }

    #[test]
    fn trailing_zero_length_step_is_allowed() {
        let mut p = RhProgram::default();
        p.steps.push(RhStep { rh_percent: 95.0, duration_s: 0.0 });
        p.validate().unwrap();
        assert_eq!(p.sample_count(), 420);
    }

    #[test]
    fn role_parse_roundtrip() {
        for r in Role::ALL {
            assert_eq!(Role::parse(r.as_str()), Some(r));
        }
        assert_eq!(Role::parse(" Colorant "), Some(Role::Colorant));
        assert_eq!(Role::parse("catalyst"), None);
    }

    #[test]
    fn filter_threshold_edges() {
        let items: Vec<SubstanceRecord> = [0.79, 0.8, 0.95, 0.1]
            .iter()
            .map(|&relevance| SubstanceRecord {
                cas: String::from("7732-18-5"),
                name: String::from("Water"),
                role: Role::Adjuster,
                purpose: String::new(),
                relevance,
                sources: vec![],
            })
            .collect();
        assert_eq!(filter_relevant(&items, 0.8).len(), 2);
        assert_eq!(filter_relevant(&items, 0.0), items);
        assert!(filter_relevant(&items, 0.99).is_empty());
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(values in prop::collection::vec(0.0f64..100.0, 1..10)) {
            prop_assume!(values.iter().sum::<f64>() > 1e-6);
            let once = normalize_recipe(&keyed(&values)).unwrap();
            let twice = normalize_recipe(&keyed(&once.fractions())).unwrap();
            let total: f64 = once.fractions().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            for (a, b) in once.fractions().iter().zip(twice.fractions()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn normalize_is_scale_invariant(
            values in prop::collection::vec(0.0f64..100.0, 1..10),
            scale in 1e-3f64..1e3,
        ) {
            prop_assume!(values.iter().sum::<f64>() > 1e-6);
            let base = normalize_recipe(&keyed(&values)).unwrap();
            let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
            let other = normalize_recipe(&keyed(&scaled)).unwrap();
            for (a, b) in base.fractions().iter().zip(other.fractions()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn quantized_recipes_survive_json(values in prop::collection::vec(0.0f64..1.0, 1..20)) {
            prop_assume!(values.iter().sum::<f64>() > 1e-6);
            let q = normalize_recipe(&keyed(&values)).unwrap().quantized();
            let total: f64 = q.fractions().iter().sum();
            prop_assert!((total - 1.0).abs() <= SIMPLEX_TOLERANCE);
            let back: Recipe = serde_json::from_str(&serde_json::to_string(&q).unwrap()).unwrap();
            prop_assert_eq!(&back, &q);
            prop_assert_eq!(back.quantized(), q);
        }

        #[test]
        fn filter_is_monotone_in_threshold(
            scores in prop::collection::vec(0.0f64..=1.0, 0..40),
            t1 in 0.0f64..=1.0,
            t2 in 0.0f64..=1.0,
        ) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let items: Vec<ArticleRecord> = scores.iter().enumerate().map(|(i, s)| ArticleRecord {
                id: alloc::format!("a{i}"),
                title: String::new(),
                r#abstract: String::new(),
                fulltext: None,
                relevance: Some(*s),
            }).collect();
            let wide = filter_relevant(&items, lo);
            let narrow = filter_relevant(&items, hi);
            prop_assert!(narrow.iter().all(|a| wide.contains(a)));
            prop_assert!(wide.iter().all(|a| items.contains(a)));
        }
    }
}
