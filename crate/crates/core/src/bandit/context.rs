use serde::{Deserialize, Serialize};

use super::TriggerPredictor;
use crate::error::{Error, Result};
use crate::lexicon::{arousal_score, AffectLexicon, NormalizationConfig};
use crate::lm::{capped_perplexity, LanguageModel};

pub const CONTEXT_DIM: usize = 5;

/// Features of the partial twist sentence, plus a constant bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BanditContext {
    pub arousal: f64,
    pub trigger_likelihood: f64,
    /// Token count divided by the sentence cap.
    pub length: f64,
    /// Perplexity divided by the perplexity cap, clipped to `[0, 1]`.
    pub ppl: f64,
    pub bias: f64,
}

impl BanditContext {
    pub fn to_array(&self) -> [f64; CONTEXT_DIM] {
        [
            self.arousal,
            self.trigger_likelihood,
            self.length,
            self.ppl,
            self.bias,
        ]
    }

    pub fn from_slice(x: &[f64]) -> Result<Self> {
        match *x {
            [arousal, trigger_likelihood, length, ppl, bias] => Ok(BanditContext {
                arousal,
                trigger_likelihood,
                length,
                ppl,
                bias,
            }),
            _ => Err(Error::Invalid(format!(
                "context must have {CONTEXT_DIM} components, got {}",
                x.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextScaling {
    pub max_sentence_tokens: usize,
    pub ppl_cap: f64,
    pub norm: NormalizationConfig,
}

pub fn build_context(
    partial: &[String],
    story_prefix: &[String],
    lexicon: &AffectLexicon,
    provider: &dyn LanguageModel,
    trigger: &dyn TriggerPredictor,
    scaling: &ContextScaling,
) -> Result<BanditContext> {
    if story_prefix.is_empty() {
        return Err(Error::Invalid(
            "story prefix must contain the prompt".into(),
        ));
    }
    let trigger_likelihood = trigger.likelihood(partial)?;
    if !(0.0..=1.0).contains(&trigger_likelihood) {
        return Err(Error::Invalid(format!(
            "trigger likelihood {trigger_likelihood} outside [0, 1]"
        )));
    }
    if partial.is_empty() {
        return Ok(BanditContext {
            arousal: 0.0,
            trigger_likelihood,
            length: 0.0,
            ppl: 0.0,
            bias: 1.0,
        });
    }
    let ppl = capped_perplexity(provider, story_prefix, partial, scaling.ppl_cap)?;
    Ok(BanditContext {
        arousal: arousal_score(partial, lexicon, &scaling.norm),
        trigger_likelihood,
        length: (partial.len() as f64 / scaling.max_sentence_tokens as f64).min(1.0),
        ppl: (ppl / scaling.ppl_cap).clamp(0.0, 1.0),
        bias: 1.0,
    })
}
