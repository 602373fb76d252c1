//! Fixed-significance float rounding used by the canonical JSON encoding.

use alloc::format;

/// Significant digits kept for serialized fractions.
pub const FRACTION_DIGITS: usize = 9;

/// Rounds `x` to `digits` significant decimal digits.
///
/// Goes through the decimal text form so the result is exactly the value a
/// reader would parse back from a `digits`-significant rendering.
pub fn round_significant(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 || digits == 0 {
        return x;
    }
    format!("{:.*e}", digits - 1, x).parse().unwrap_or(x)
}

/// serde adapter writing an `f64` with [`FRACTION_DIGITS`] significant digits.
pub mod fraction {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(super::round_significant(*value, super::FRACTION_DIGITS))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        f64::deserialize(d)
    }
}

/// Same as [`fraction`] for optional values.
pub mod opt_fraction {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(v) => s.serialize_some(&super::round_significant(*v, super::FRACTION_DIGITS)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Option::<f64>::deserialize(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_nine_digits() {
        assert_eq!(round_significant(0.123_456_789_49, 9), 0.123_456_789);
        assert_eq!(round_significant(1.0 / 3.0, 9), 0.333_333_333);
        assert_eq!(round_significant(0.0, 9), 0.0);
        assert_eq!(round_significant(126.0, 2), 130.0);
    }

    #[test]
    fn rounding_is_idempotent() {
        let x = 0.718_281_828_459;
        let once = round_significant(x, 9);
        assert_eq!(round_significant(once, 9), once);
    }
}
