//! Picks the twist sentence by arousal plus valence contrast with the story.

use serde::{Deserialize, Serialize};

use crate::decoder::BeamCandidate;
use crate::error::{Error, Result};
use crate::lexicon::{arousal_score, valence_score, AffectLexicon, NormalizationConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankRow {
    pub arousal: f64,
    pub valence: f64,
    pub contrast: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankResult {
    pub chosen_index: usize,
    pub chosen: BeamCandidate,
    pub story_valence: f64,
    pub scores: Vec<RerankRow>,
}

/// `argmax_i arousal(c_i) + |valence(c_i) - valence(story_prefix)|`, ties
/// going to the higher `logprob_sum` and then the lower index.
pub fn rerank(
    candidates: &[BeamCandidate],
    story_prefix: &[String],
    lexicon: &AffectLexicon,
    cfg: &NormalizationConfig,
) -> Result<RerankResult> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if story_prefix.is_empty() {
        return Err(Error::Invalid(
            "story prefix must contain the prompt".into(),
        ));
    }
    let story_valence = valence_score(story_prefix, lexicon, cfg);
    let scores: Vec<RerankRow> = candidates
        .iter()
        .map(|c| {
            let arousal = arousal_score(&c.tokens, lexicon, cfg);
            let valence = valence_score(&c.tokens, lexicon, cfg);
            let contrast = (valence - story_valence).abs();
            RerankRow {
                arousal,
                valence,
                contrast,
                total: arousal + contrast,
            }
        })
        .collect();
    let mut best = 0;
    for i in 1..candidates.len() {
        let (t, bt) = (scores[i].total, scores[best].total);
        if t > bt || (t == bt && candidates[i].logprob_sum > candidates[best].logprob_sum) {
            best = i;
        }
    }
    Ok(RerankResult {
        chosen_index: best,
        chosen: candidates[best].clone(),
        story_valence,
        scores,
    })
}

impl RerankResult {
    /// Audit table: tokens, arousal, valence, contrast, total, chosen flag.
    pub fn audit_csv(&self, candidates: &[BeamCandidate]) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
        w.write_record([
            "tokens", "arousal", "valence", "contrast", "total", "chosen",
        ])
        .map_err(io)?;
        for (i, (c, row)) in candidates.iter().zip(&self.scores).enumerate() {
            w.write_record([
                c.tokens.join(" "),
                row.arousal.to_string(),
                row.valence.to_string(),
                row.contrast.to_string(),
                row.total.to_string(),
                (i == self.chosen_index).to_string(),
            ])
            .map_err(io)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Invalid(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}
