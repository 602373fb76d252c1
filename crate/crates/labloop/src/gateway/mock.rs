use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use super::{Backend, BackendError, Request};

/// Scripted backend replaying canned answers.
///
/// Answers are keyed by template id and consumed in call order. A call with
/// a scope (the article id during mining) first looks for the key
/// `template_id/scope`, then falls back to `template_id`; each key keeps its
/// own counter, so per-article scripts stay deterministic under concurrency.
#[derive(Debug, Default)]
pub struct MockBackend {
    script: BTreeMap<String, Vec<String>>,
    counters: Mutex<HashMap<String, usize>>,
    log: Mutex<Vec<Request>>,
    latency: Duration,
}

impl MockBackend {
    pub fn new(script: BTreeMap<String, Vec<String>>) -> MockBackend {
        MockBackend { script, ..MockBackend::default() }
    }

    /// Parses a fixture document `{key: [response, ...]}`.
    pub fn from_json(text: &str) -> Result<MockBackend, serde_json::Error> {
        Ok(MockBackend::new(serde_json::from_str(text)?))
    }

    pub fn from_file(path: &Path) -> std::io::Result<MockBackend> {
        let text = std::fs::read_to_string(path)?;
        MockBackend::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    /// Sleeps this long on every call, standing in for network round trips.
    pub fn with_latency(mut self, latency: Duration) -> MockBackend {
        self.latency = latency;
        self
    }

    /// Every request received so far, in arrival order.
    pub fn requests(&self) -> Vec<Request> {
        self.log.lock().unwrap().clone()
    }

    fn key_for(&self, req: &Request) -> String {
        if let Some(scope) = &req.scope {
            let scoped = format!("{}/{}", req.template_id, scope);
            if self.script.contains_key(&scoped) {
                return scoped;
            }
        }
        req.template_id.clone()
    }
}

impl Backend for MockBackend {
    fn id(&self) -> &str {
        "mock"
    }

    fn call(&self, req: &Request) -> Result<String, BackendError> {
        if !self.latency.is_zero() {
            std::thread::sleep(self.latency);
        }
        self.log.lock().unwrap().push(req.clone());
        let key = self.key_for(req);
        let index = {
            let mut counters = self.counters.lock().unwrap();
            let c = counters.entry(key.clone()).or_insert(0);
            *c += 1;
            *c - 1
        };
        self.script
            .get(&key)
            .and_then(|answers| answers.get(index))
            .cloned()
            .ok_or_else(|| BackendError(format!("mock script has no answer #{} for {key}", index + 1)))
    }
}
