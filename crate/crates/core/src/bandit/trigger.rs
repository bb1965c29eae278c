//! Event-trigger likelihood predictors.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lm::remote::{json_agent, post_json};
use crate::lm::wire::{self, TriggerRequest};

/// Likelihood that the next token of a partial sentence starts a notable event.
pub trait TriggerPredictor: Send + Sync {
    fn likelihood(&self, partial: &[String]) -> Result<f64>;

    fn describe(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantTrigger(pub f64);

impl TriggerPredictor for ConstantTrigger {
    fn likelihood(&self, _: &[String]) -> Result<f64> {
        Ok(self.0)
    }

    fn describe(&self) -> String {
        format!("constant({})", self.0)
    }
}

/// Lookup table keyed by a hash of the partial sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableTrigger {
    pub default: f64,
    pub table: HashMap<String, f64>,
}

impl TableTrigger {
    /// Hex SHA-256 of the tokens joined by single spaces.
    pub fn context_key(partial: &[String]) -> String {
        hex::encode(Sha256::digest(partial.join(" ").as_bytes()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: TableTrigger = serde_json::from_str(text)?;
        let in_range = |p: f64| (0.0..=1.0).contains(&p);
        if !in_range(t.default) || !t.table.values().all(|&p| in_range(p)) {
            return Err(Error::Invalid(
                "trigger probabilities must lie in [0, 1]".into(),
            ));
        }
        Ok(t)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

impl TriggerPredictor for TableTrigger {
    fn likelihood(&self, partial: &[String]) -> Result<f64> {
        Ok(self
            .table
            .get(&Self::context_key(partial))
            .copied()
            .unwrap_or(self.default))
    }

    fn describe(&self) -> String {
        format!("table({} entries)", self.table.len())
    }
}

#[derive(Clone)]
pub struct RemoteTrigger {
    url: String,
    agent: ureq::Agent,
}

impl RemoteTrigger {
    pub fn new(endpoint: &str) -> Self {
        RemoteTrigger {
            url: format!("{}{}", endpoint.trim_end_matches('/'), wire::TRIGGER_PATH),
            agent: json_agent(),
        }
    }
}

impl TriggerPredictor for RemoteTrigger {
    fn likelihood(&self, partial: &[String]) -> Result<f64> {
        let req = TriggerRequest {
            prefix: partial.to_vec(),
        };
        wire::decode_trigger_reply(&post_json(&self.agent, &self.url, &req)?)
    }

    fn describe(&self) -> String {
        format!("remote({})", self.url)
    }
}

pub type TriggerHandle = Arc<dyn TriggerPredictor>;
