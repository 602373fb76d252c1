use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Declarative shape of a structured model answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Schema {
    Number {
        #[serde(default)]
        min: Option<f64>,
        #[serde(default)]
        max: Option<f64>,
    },
    String {
        #[serde(default)]
        min_len: usize,
    },
    Enum {
        values: Vec<String>,
    },
    Array {
        items: Box<Schema>,
        #[serde(default)]
        min_items: Option<usize>,
        #[serde(default)]
        max_items: Option<usize>,
        /// Reject repeated string items, compared case-insensitively.
        #[serde(default)]
        unique: bool,
    },
    /// Every listed field is required; extra fields are ignored.
    Object {
        fields: Vec<(String, Schema)>,
    },
}

impl Schema {
    /// Checks `value`, naming the first offending path on failure.
    pub fn validate(&self, value: &Value) -> Result<(), String> {
        self.check(value, "$")
    }

    fn check(&self, value: &Value, path: &str) -> Result<(), String> {
        match self {
            Schema::Number { min, max } => {
                let x = value.as_f64().ok_or_else(|| format!("{path} must be a number"))?;
                if let Some(lo) = min {
                    if x < *lo {
                        return Err(format!("{path} = {x} is below the minimum {lo}"));
                    }
                }
                if let Some(hi) = max {
                    if x > *hi {
                        return Err(format!("{path} = {x} is above the maximum {hi}"));
                    }
                }
                Ok(())
            }
            Schema::String { min_len } => {
                let s = value.as_str().ok_or_else(|| format!("{path} must be a string"))?;
                if s.trim().chars().count() < *min_len {
                    return Err(format!("{path} must have at least {min_len} non-blank characters"));
                }
                Ok(())
            }
            Schema::Enum { values } => {
                let s = value.as_str().ok_or_else(|| format!("{path} must be a string"))?;
                if values.iter().any(|v| v == s) {
                    Ok(())
                } else {
                    Err(format!("{path} = {s:?} is not one of {}", values.join(", ")))
                }
            }
            Schema::Array { items, min_items, max_items, unique } => {
                let arr = value.as_array().ok_or_else(|| format!("{path} must be an array"))?;
                if let Some(lo) = min_items {
                    if arr.len() < *lo {
                        return Err(format!("{path} has {} items, expected at least {lo}", arr.len()));
                    }
                }
                if let Some(hi) = max_items {
                    if arr.len() > *hi {
                        return Err(format!("{path} has {} items, expected at most {hi}", arr.len()));
                    }
                }
                for (i, item) in arr.iter().enumerate() {
                    items.check(item, &format!("{path}[{i}]"))?;
                }
                if *unique {
                    let mut seen = std::collections::BTreeSet::new();
                    for item in arr {
                        let key = item.as_str().map(|s| s.trim().to_lowercase()).unwrap_or_else(|| item.to_string());
                        if !seen.insert(key.clone()) {
                            return Err(format!("{path} repeats {key:?}"));
                        }
                    }
                }
                Ok(())
            }
            Schema::Object { fields } => {
                let obj = value.as_object().ok_or_else(|| format!("{path} must be an object"))?;
                for (name, schema) in fields {
                    let v = obj.get(name).ok_or_else(|| format!("{path} is missing field {name:?}"))?;
                    schema.check(v, &format!("{path}.{name}"))?;
                }
                Ok(())
            }
        }
    }
}
