//! The single path to the language model: templated prompts, schema-checked
//! JSON answers and bounded self-repair retries over a pluggable backend.

#[cfg(feature = "live")]
mod live;
mod mock;
mod schema;
mod template;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[cfg(feature = "live")]
pub use live::LiveBackend;
pub use mock::MockBackend;
pub use schema::Schema;
pub use template::{PromptTemplate, Registry, KEYWORDS, PASSAGES, RECORDS, RELEVANCE};

pub const MAX_RETRIES_LIMIT: u32 = 10;

/// One prompt sent to a backend.
#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub template_id: String,
    /// Optional routing hint, e.g. the article being processed.
    pub scope: Option<String>,
    pub prompt: String,
    /// 0 for the first try, then 1, 2, ... for repairs.
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{0}")]
pub struct BackendError(pub String);

pub trait Backend: Send + Sync {
    fn id(&self) -> &str;
    fn call(&self, request: &Request) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("template {template:?} names unregistered schema {schema:?}")]
    UnknownSchema { template: String, schema: String },
    #[error("slot {{{{{0}}}}} has no binding")]
    UnboundSlot(String),
    #[error("no valid answer after {attempts} attempts; last problem: {last_error}")]
    ExhaustedRetries { attempts: u32, last_error: String },
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("invalid gateway configuration: {0}")]
    InvalidConfig(String),
}

/// A schema-valid answer.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub value: Value,
    pub retries_used: u32,
}

/// Gateway settings as they appear in a campaign config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewayConfig {
    /// `mock` or `live`.
    #[serde(default = "default_backend")]
    pub backend: String,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    /// Mock script file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<PathBuf>,
    /// Artificial per-call delay for the mock backend.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub latency_ms: u64,
    /// Chat-completions endpoint for the live backend.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Environment variable holding the live backend's API key.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
}

fn default_backend() -> String {
    "mock".into()
}
fn default_retries() -> u32 {
    3
}
fn default_timeout() -> f64 {
    60.0
}
fn default_key_env() -> String {
    "LABLOOP_API_KEY".into()
}
fn is_zero(v: &u64) -> bool {
    *v == 0
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            backend: default_backend(),
            max_retries: default_retries(),
            timeout_s: default_timeout(),
            fixture: None,
            latency_ms: 0,
            base_url: None,
            model: None,
            api_key_env: default_key_env(),
        }
    }
}

impl GatewayConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.max_retries > MAX_RETRIES_LIMIT {
            return Err(GatewayError::InvalidConfig(format!(
                "max_retries {} exceeds {MAX_RETRIES_LIMIT}",
                self.max_retries
            )));
        }
        if !(self.timeout_s > 0.0) {
            return Err(GatewayError::InvalidConfig("timeout_s must be positive".into()));
        }
        Ok(())
    }
}

/// Cheap to clone; clones share the backend.
#[derive(Clone)]
pub struct Gateway {
    registry: Arc<Registry>,
    backend: Arc<dyn Backend>,
    max_retries: u32,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway").field("backend", &self.backend.id()).field("max_retries", &self.max_retries).finish()
    }
}

impl Gateway {
    pub fn new(registry: Registry, backend: Arc<dyn Backend>, max_retries: u32) -> Result<Gateway, GatewayError> {
        if max_retries > MAX_RETRIES_LIMIT {
            return Err(GatewayError::InvalidConfig(format!("max_retries {max_retries} exceeds {MAX_RETRIES_LIMIT}")));
        }
        for t in registry.templates.values() {
            if !registry.schemas.contains_key(&t.schema_id) {
                return Err(GatewayError::UnknownSchema {
                    template: t.template_id.clone(),
                    schema: t.schema_id.clone(),
                });
            }
        }
        Ok(Gateway { registry: Arc::new(registry), backend, max_retries })
    }

    /// Builds the backend named by `config` over the builtin templates.
    pub fn from_config(config: &GatewayConfig) -> Result<Gateway, GatewayError> {
        config.validate()?;
        let backend: Arc<dyn Backend> = match config.backend.as_str() {
            "mock" => {
                let path = config
                    .fixture
                    .as_ref()
                    .ok_or_else(|| GatewayError::InvalidConfig("mock backend needs a fixture file".into()))?;
                let mock = MockBackend::from_file(path)
                    .map_err(|e| GatewayError::InvalidConfig(format!("{}: {e}", path.display())))?;
                Arc::new(mock.with_latency(Duration::from_millis(config.latency_ms)))
            }
            #[cfg(feature = "live")]
            "live" => Arc::new(LiveBackend::from_config(config)?),
            other => {
                return Err(GatewayError::InvalidConfig(format!("backend {other:?} is not available in this build")))
            }
        };
        Gateway::new(Registry::builtin(), backend, config.max_retries)
    }

    pub fn backend_id(&self) -> &str {
        self.backend.id()
    }

    pub fn max_retries(&self) -> u32 {
        self.max_retries
    }

    pub fn complete(&self, template_id: &str, bindings: &BTreeMap<String, String>) -> Result<Completion, GatewayError> {
        self.complete_scoped(None, template_id, bindings)
    }

    /// Renders the template, calls the backend and validates the answer
    /// against the template's schema. A failing answer is retried with the
    /// problem appended to the prompt, at most `max_retries` times.
    pub fn complete_scoped(
        &self,
        scope: Option<&str>,
        template_id: &str,
        bindings: &BTreeMap<String, String>,
    ) -> Result<Completion, GatewayError> {
        let template = self
            .registry
            .templates
            .get(template_id)
            .ok_or_else(|| GatewayError::UnknownTemplate(template_id.to_string()))?;
        let schema = self.registry.schemas.get(&template.schema_id).ok_or_else(|| GatewayError::UnknownSchema {
            template: template_id.to_string(),
            schema: template.schema_id.clone(),
        })?;
        let base = template.render(bindings).map_err(GatewayError::UnboundSlot)?;

        let mut prompt = base.clone();
        let mut last_error = String::new();
        for attempt in 0..=self.max_retries {
            let request = Request {
                template_id: template_id.to_string(),
                scope: scope.map(str::to_string),
                prompt: prompt.clone(),
                attempt,
            };
            let answer = self.backend.call(&request).map_err(|e| GatewayError::BackendUnavailable(e.0))?;
            let problem = match serde_json::from_str::<Value>(answer.trim()) {
                Ok(value) => match schema.validate(&value) {
                    Ok(()) => return Ok(Completion { value, retries_used: attempt }),
                    Err(e) => e,
                },
                Err(e) => format!("the answer is not valid JSON ({e})"),
            };
            prompt = format!(
                "{base}\n\nYour previous answer failed validation because {problem}. Reply again with output that satisfies the requested format."
            );
            last_error = problem;
        }
        Err(GatewayError::ExhaustedRetries { attempts: self.max_retries + 1, last_error })
    }
}

/// Builds a binding map from `(slot, value)` pairs.
pub fn bindings<const N: usize>(pairs: [(&str, &str); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}
