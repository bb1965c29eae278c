use std::time::Duration;

use serde::Serialize;

use super::wire::{self, NextTokenRequest, PerplexityRequest};
use super::{LanguageModel, TokenDistribution};
use crate::error::{Error, Result};

/// Blocking JSON-over-HTTP client for a remote provider.
#[derive(Clone)]
pub struct RemoteProvider {
    base: String,
    agent: ureq::Agent,
}

impl std::fmt::Debug for RemoteProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteProvider")
            .field("base", &self.base)
            .finish()
    }
}

impl RemoteProvider {
    pub fn new(endpoint: impl Into<String>) -> Self {
        RemoteProvider {
            base: endpoint.into().trim_end_matches('/').to_string(),
            agent: json_agent(),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.base
    }
}

pub(crate) fn json_agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(30)))
        .build()
        .into()
}

/// POSTs `body` as JSON and returns the raw response text of a 200 reply.
pub(crate) fn post_json<B: Serialize>(agent: &ureq::Agent, url: &str, body: &B) -> Result<String> {
    let payload = serde_json::to_string(body)?;
    let mut resp = agent
        .post(url)
        .header("content-type", "application/json")
        .send(payload.as_str())
        .map_err(|e| Error::RemoteUnreachable(format!("{url}: {e}")))?;
    let status = resp.status().as_u16();
    let text = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| Error::RemoteProtocol(format!("{url}: unreadable body: {e}")))?;
    if status != 200 {
        return Err(Error::RemoteProtocol(format!(
            "{url}: status {status}: {text}"
        )));
    }
    Ok(text)
}

impl LanguageModel for RemoteProvider {
    fn next_token_distribution(
        &self,
        prefix: &[String],
        top_k: usize,
    ) -> Result<TokenDistribution> {
        let req = NextTokenRequest {
            prefix: prefix.to_vec(),
            top_k,
        };
        let url = format!("{}{}", self.base, wire::NEXT_TOKEN_PATH);
        let d = wire::decode_next_token_reply(&post_json(&self.agent, &url, &req)?)?;
        if d.len() > top_k {
            return Err(Error::RemoteProtocol(format!(
                "asked for {top_k} tokens, got {}",
                d.len()
            )));
        }
        Ok(d)
    }

    fn sequence_perplexity(&self, context: &[String], target: &[String]) -> Result<f64> {
        let req = PerplexityRequest {
            context: context.to_vec(),
            target: target.to_vec(),
        };
        let url = format!("{}{}", self.base, wire::PERPLEXITY_PATH);
        wire::decode_perplexity_reply(&post_json(&self.agent, &url, &req)?)
    }

    fn describe(&self) -> String {
        format!("remote({})", self.base)
    }
}
