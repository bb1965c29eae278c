use serde::{Deserialize, Serialize};

use crate::decoder::BeamCandidate;
use crate::error::{Error, Result};

/// Penalty weights of the per-step reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffConfig {
    /// Weight on candidate perplexity.
    pub alpha: f64,
    /// Weight on beam width.
    pub beta: f64,
}

impl Default for PayoffConfig {
    fn default() -> Self {
        PayoffConfig {
            alpha: 0.00015,
            beta: 0.0003,
        }
    }
}

impl PayoffConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if ok(self.alpha) && ok(self.beta) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "payoff coefficients must be finite and >= 0, got alpha={} beta={}",
                self.alpha, self.beta
            )))
        }
    }
}

/// `max_i (arousal_i - alpha * ppl_i - beta * beam_size)`.
pub fn payoff(candidates: &[BeamCandidate], beam_size: usize, cfg: &PayoffConfig) -> Result<f64> {
    let width_cost = cfg.beta * beam_size as f64;
    candidates
        .iter()
        .map(|c| c.arousal - cfg.alpha * c.ppl - width_cost)
        .reduce(f64::max)
        .ok_or(Error::EmptyCandidates)
}
