//! Next-token distributions and perplexity behind one provider interface.

mod ngram;
pub(crate) mod remote;
mod server;
pub mod wire;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ngram::{NgramModel, MAX_ORDER};
pub use remote::RemoteProvider;
pub use server::LoopbackServer;

/// Truncated next-token view, most probable first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenDistribution {
    tokens: Vec<String>,
    logprobs: Vec<f64>,
}

impl TokenDistribution {
    pub fn new(tokens: Vec<String>, logprobs: Vec<f64>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        if tokens.len() != logprobs.len() {
            return Err(Error::Invalid(format!(
                "{} tokens but {} logprobs",
                tokens.len(),
                logprobs.len()
            )));
        }
        if logprobs.iter().any(|&lp| lp.is_nan() || lp > 0.0) {
            return Err(Error::Invalid("logprobs must be <= 0".into()));
        }
        if logprobs.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Invalid(
                "logprobs must be sorted non-increasing".into(),
            ));
        }
        Ok(TokenDistribution { tokens, logprobs })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn logprobs(&self) -> &[f64] {
        &self.logprobs
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.tokens
            .iter()
            .map(String::as_str)
            .zip(self.logprobs.iter().copied())
    }
}

/// Anything that can score continuations of a token prefix.
pub trait LanguageModel: Send + Sync {
    /// The `top_k` most probable next tokens after `prefix`. Ties are broken
    /// by [`crate::tokens::token_order`].
    fn next_token_distribution(&self, prefix: &[String], top_k: usize)
        -> Result<TokenDistribution>;

    /// `exp(-mean ln P(target_i | context, target_<i))`, `+inf` when any
    /// step has probability zero.
    fn sequence_perplexity(&self, context: &[String], target: &[String]) -> Result<f64>;

    fn describe(&self) -> String;
}

/// Perplexity with the zero-probability sentinel replaced by `ppl_cap`.
pub fn capped_perplexity(
    model: &dyn LanguageModel,
    context: &[String],
    target: &[String],
    ppl_cap: f64,
) -> Result<f64> {
    if target.is_empty() {
        return Err(Error::Invalid("perplexity target must be non-empty".into()));
    }
    Ok(model.sequence_perplexity(context, target)?.min(ppl_cap))
}

#[derive(Clone)]
pub enum ProviderHandle {
    BuiltinNgram(Arc<NgramModel>),
    Remote(RemoteProvider),
}

impl ProviderHandle {
    fn inner(&self) -> &dyn LanguageModel {
        match self {
            ProviderHandle::BuiltinNgram(m) => m.as_ref(),
            ProviderHandle::Remote(r) => r,
        }
    }
}

impl LanguageModel for ProviderHandle {
    fn next_token_distribution(
        &self,
        prefix: &[String],
        top_k: usize,
    ) -> Result<TokenDistribution> {
        self.inner().next_token_distribution(prefix, top_k)
    }

    fn sequence_perplexity(&self, context: &[String], target: &[String]) -> Result<f64> {
        self.inner().sequence_perplexity(context, target)
    }

    fn describe(&self) -> String {
        self.inner().describe()
    }
}
