use std::time::Duration;

use serde_json::{json, Value};

use super::{Backend, BackendError, GatewayConfig, GatewayError, Request};

/// OpenAI-style `/chat/completions` client.
pub struct LiveBackend {
    client: reqwest::blocking::Client,
    url: String,
    model: String,
    api_key: String,
}

impl LiveBackend {
    pub fn from_config(config: &GatewayConfig) -> Result<LiveBackend, GatewayError> {
        let base = config
            .base_url
            .as_deref()
            .ok_or_else(|| GatewayError::InvalidConfig("live backend needs base_url".into()))?;
        let api_key = std::env::var(&config.api_key_env).map_err(|_| {
            GatewayError::InvalidConfig(format!("environment variable {} is not set", config.api_key_env))
        })?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_s))
            .build()
            .map_err(|e| GatewayError::InvalidConfig(e.to_string()))?;
        Ok(LiveBackend {
            client,
            url: format!("{}/chat/completions", base.trim_end_matches('/')),
            model: config.model.clone().unwrap_or_else(|| "gpt-4".into()),
            api_key,
        })
    }
}

impl Backend for LiveBackend {
    fn id(&self) -> &str {
        "live"
    }

    fn call(&self, req: &Request) -> Result<String, BackendError> {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": req.prompt}],
        });
        let resp = self
            .client
            .post(&self.url)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| BackendError(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(BackendError(format!("HTTP {}", resp.status())));
        }
        let v: Value = resp.json().map_err(|e| BackendError(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError("response has no message content".into()))
    }
}
