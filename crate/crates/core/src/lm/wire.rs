//! JSON bodies of the remote provider protocol.
//!
//! JSON has no infinities, so a zero-probability logprob (`-inf`) travels as
//! `null`, as does an infinite perplexity.

use serde::{Deserialize, Serialize};

use super::TokenDistribution;
use crate::error::{Error, Result};

pub const NEXT_TOKEN_PATH: &str = "/v1/next_token";
pub const PERPLEXITY_PATH: &str = "/v1/perplexity";
pub const TRIGGER_PATH: &str = "/v1/trigger";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextTokenRequest {
    pub prefix: Vec<String>,
    pub top_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextTokenResponse {
    pub tokens: Vec<String>,
    pub logprobs: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerplexityRequest {
    pub context: Vec<String>,
    pub target: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerplexityResponse {
    /// `null` encodes an infinite perplexity; the field itself is required.
    #[serde(deserialize_with = "Option::deserialize")]
    pub ppl: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerRequest {
    pub prefix: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerResponse {
    pub p: f64,
}

impl From<&TokenDistribution> for NextTokenResponse {
    fn from(d: &TokenDistribution) -> Self {
        NextTokenResponse {
            tokens: d.tokens().to_vec(),
            logprobs: d
                .logprobs()
                .iter()
                .map(|&lp| lp.is_finite().then_some(lp))
                .collect(),
        }
    }
}

impl TryFrom<NextTokenResponse> for TokenDistribution {
    type Error = Error;

    fn try_from(r: NextTokenResponse) -> Result<Self> {
        let logprobs = r
            .logprobs
            .into_iter()
            .map(|lp| lp.unwrap_or(f64::NEG_INFINITY))
            .collect();
        TokenDistribution::new(r.tokens, logprobs)
            .map_err(|e| Error::RemoteProtocol(format!("bad next_token reply: {e}")))
    }
}

fn protocol<T: for<'de> Deserialize<'de>>(body: &str, what: &str) -> Result<T> {
    serde_json::from_str(body).map_err(|e| Error::RemoteProtocol(format!("bad {what} reply: {e}")))
}

pub fn decode_next_token_reply(body: &str) -> Result<TokenDistribution> {
    protocol::<NextTokenResponse>(body, "next_token")?.try_into()
}

pub fn decode_perplexity_reply(body: &str) -> Result<f64> {
    let r: PerplexityResponse = protocol(body, "perplexity")?;
    match r.ppl {
        None => Ok(f64::INFINITY),
        Some(p) if p > 0.0 => Ok(p),
        Some(p) => Err(Error::RemoteProtocol(format!(
            "perplexity {p} out of range"
        ))),
    }
}

pub fn decode_trigger_reply(body: &str) -> Result<f64> {
    let r: TriggerResponse = protocol(body, "trigger")?;
    if (0.0..=1.0).contains(&r.p) {
        Ok(r.p)
    } else {
        Err(Error::RemoteProtocol(format!(
            "trigger likelihood {} outside [0, 1]",
            r.p
        )))
    }
}
