//! Sentence-level beam search.
//!
//! Ordinary sentences use a constant beam width. The twist sentence asks a
//! width policy (usually the LinUCB bandit) for a width before every token,
//! scores the resulting beam with the payoff function and records a trace.
//! Candidates are ranked by length-normalized log-probability; finished
//! candidates keep their slot until every slot has finished.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bandit::{
    build_context, payoff, ContextScaling, EpisodeStep, LinUcbState, PayoffConfig,
    TriggerPredictor, CONTEXT_DIM,
};
use crate::error::{Error, Result};
use crate::lexicon::{length_penalty, AffectLexicon, NormalizationConfig};
use crate::lm::LanguageModel;
use crate::tokens::{self, EOS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamCandidate {
    pub tokens: Vec<String>,
    pub logprob_sum: f64,
    /// Length-normalized arousal of `tokens`.
    pub arousal: f64,
    /// Capped perplexity of `tokens` given the story prefix.
    pub ppl: f64,
    pub finished: bool,
    #[serde(skip)]
    arousal_sum: f64,
}

impl BeamCandidate {
    fn root() -> Self {
        BeamCandidate {
            tokens: Vec::new(),
            logprob_sum: 0.0,
            arousal: 0.0,
            ppl: 1.0,
            finished: false,
            arousal_sum: 0.0,
        }
    }

    /// A finished candidate with precomputed scores.
    pub fn scored(tokens: Vec<String>, arousal: f64, ppl: f64) -> Self {
        BeamCandidate {
            tokens,
            logprob_sum: 0.0,
            arousal,
            ppl,
            finished: true,
            arousal_sum: 0.0,
        }
    }

    /// Length-normalized log-probability used for ranking.
    pub fn score(&self) -> f64 {
        if self.tokens.is_empty() {
            0.0
        } else {
            self.logprob_sum / self.tokens.len() as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    /// Bandit arms, strictly increasing.
    pub beam_sizes: Vec<usize>,
    /// Width for sentences other than the twist.
    pub fixed_beam: usize,
    pub max_sentence_tokens: usize,
    pub terminators: Vec<String>,
    pub lambda: f64,
    pub payoff: PayoffConfig,
    pub ppl_cap: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            beam_sizes: vec![10, 30, 60],
            fixed_beam: 10,
            max_sentence_tokens: 30,
            terminators: [".", "!", "?", EOS].iter().map(|s| s.to_string()).collect(),
            lambda: 1.5,
            payoff: PayoffConfig::default(),
            ppl_cap: 1e6,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.fixed_beam == 0 {
            return bad("fixed_beam must be >= 1");
        }
        if self.max_sentence_tokens == 0 {
            return bad("max_sentence_tokens must be >= 1");
        }
        if self.beam_sizes.is_empty()
            || self.beam_sizes[0] == 0
            || self.beam_sizes.windows(2).any(|w| w[0] >= w[1])
        {
            return bad("beam_sizes must be non-empty, positive and strictly increasing");
        }
        if !(self.ppl_cap.is_finite() && self.ppl_cap > 0.0) {
            return bad("ppl_cap must be finite and positive");
        }
        self.norm().validate()?;
        self.payoff.validate()
    }

    pub fn norm(&self) -> NormalizationConfig {
        NormalizationConfig {
            lambda: self.lambda,
        }
    }

    pub fn scaling(&self) -> ContextScaling {
        ContextScaling {
            max_sentence_tokens: self.max_sentence_tokens,
            ppl_cap: self.ppl_cap,
            norm: self.norm(),
        }
    }

    fn is_terminator(&self, token: &str) -> bool {
        token == EOS || self.terminators.iter().any(|t| t == token)
    }
}

/// One token step of a twist-sentence decode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub pos: usize,
    pub beam: usize,
    pub context: [f64; CONTEXT_DIM],
    pub payoff: f64,
    pub best_arousal: f64,
    pub best_ppl: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GenerationTrace {
    pub records: Vec<TraceRecord>,
}

impl GenerationTrace {
    pub fn beams(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.beam).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// How the twist decoder picks its width before each token.
pub enum WidthPolicy<'a> {
    Bandit {
        state: &'a mut LinUcbState,
        learn: bool,
    },
    Constant(usize),
}

/// Everything produced while decoding the twist sentence.
#[derive(Debug, Clone)]
pub struct TwistDecode {
    /// Finished candidates of the final beam, best-ranked first.
    pub candidates: Vec<BeamCandidate>,
    pub trace: GenerationTrace,
    /// Per-step payoffs of every arm; empty unless requested.
    pub episode: Vec<EpisodeStep>,
}

/// Shared references needed to score candidates while decoding.
pub struct TwistAssets<'a> {
    pub provider: &'a dyn LanguageModel,
    pub lexicon: &'a AffectLexicon,
    pub trigger: &'a dyn TriggerPredictor,
}

struct Expander<'a> {
    provider: &'a dyn LanguageModel,
    lexicon: Option<&'a AffectLexicon>,
    story_prefix: &'a [String],
    cfg: &'a DecodeConfig,
}

impl Expander<'_> {
    fn extend(&self, parent: &BeamCandidate, token: &str, logprob: f64) -> BeamCandidate {
        let mut tokens = parent.tokens.clone();
        tokens.push(token.to_string());
        let n = tokens.len();
        let logprob_sum = parent.logprob_sum + logprob;
        let arousal_sum = parent.arousal_sum + self.lexicon.map_or(0.0, |l| l.arousal(token));
        BeamCandidate {
            arousal: arousal_sum / length_penalty(n, &self.cfg.norm()),
            ppl: (-logprob_sum / n as f64).exp().min(self.cfg.ppl_cap),
            finished: self.cfg.is_terminator(token) || n >= self.cfg.max_sentence_tokens,
            tokens,
            logprob_sum,
            arousal_sum,
        }
    }

    /// Grows every unfinished candidate by its `width` best tokens and keeps
    /// the `width` best of the pool.
    fn step(&self, beam: &[BeamCandidate], width: usize) -> Result<Vec<BeamCandidate>> {
        let mut pool = Vec::new();
        let mut context = self.story_prefix.to_vec();
        for cand in beam {
            if cand.finished {
                pool.push(cand.clone());
                continue;
            }
            context.truncate(self.story_prefix.len());
            context.extend_from_slice(&cand.tokens);
            let dist = self.provider.next_token_distribution(&context, width)?;
            for (token, lp) in dist.iter() {
                if lp == f64::NEG_INFINITY || token == tokens::BOS || token == tokens::UNK {
                    continue;
                }
                pool.push(self.extend(cand, token, lp));
            }
        }
        if pool.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        pool.sort_by(|a, b| b.score().total_cmp(&a.score()));
        pool.truncate(width);
        Ok(pool)
    }
}

fn all_finished(beam: &[BeamCandidate]) -> bool {
    beam.iter().all(|c| c.finished)
}

/// Plain beam search with `width`; returns the final beam, best first.
pub fn beam_search(
    provider: &dyn LanguageModel,
    story_prefix: &[String],
    width: usize,
    lexicon: Option<&AffectLexicon>,
    cfg: &DecodeConfig,
) -> Result<Vec<BeamCandidate>> {
    if story_prefix.is_empty() {
        return Err(Error::Invalid(
            "story prefix must contain the prompt".into(),
        ));
    }
    if width == 0 {
        return Err(Error::InvalidConfig("beam width must be >= 1".into()));
    }
    let ex = Expander {
        provider,
        lexicon,
        story_prefix,
        cfg,
    };
    let mut beam = vec![BeamCandidate::root()];
    while !all_finished(&beam) {
        beam = ex.step(&beam, width)?;
    }
    Ok(beam)
}

/// Best finished sentence under the fixed beam width. Candidate arousal is
/// only populated when a lexicon is supplied.
pub fn decode_sentence_fixed(
    provider: &dyn LanguageModel,
    story_prefix: &[String],
    lexicon: Option<&AffectLexicon>,
    cfg: &DecodeConfig,
) -> Result<BeamCandidate> {
    let beam = beam_search(provider, story_prefix, cfg.fixed_beam, lexicon, cfg)?;
    Ok(beam
        .into_iter()
        .next()
        .expect("beam search never returns an empty beam"))
}

/// Twist-sentence decode with the bandit choosing widths.
pub fn decode_sentence_dynamic(
    assets: &TwistAssets<'_>,
    story_prefix: &[String],
    bandit: &mut LinUcbState,
    cfg: &DecodeConfig,
    learn: bool,
) -> Result<(Vec<BeamCandidate>, GenerationTrace)> {
    let out = decode_twist(
        assets,
        story_prefix,
        WidthPolicy::Bandit {
            state: bandit,
            learn,
        },
        cfg,
        false,
    )?;
    Ok((out.candidates, out.trace))
}

/// Twist-sentence decode under any width policy. With `counterfactual`,
/// every arm in `cfg.beam_sizes` is expanded at each step so the episode
/// carries the payoff of all arms.
pub fn decode_twist(
    assets: &TwistAssets<'_>,
    story_prefix: &[String],
    mut policy: WidthPolicy<'_>,
    cfg: &DecodeConfig,
    counterfactual: bool,
) -> Result<TwistDecode> {
    if story_prefix.is_empty() {
        return Err(Error::Invalid(
            "story prefix must contain the prompt".into(),
        ));
    }
    if let WidthPolicy::Bandit { state, .. } = &policy {
        if state.dim() != CONTEXT_DIM {
            return Err(Error::InvalidConfig(format!(
                "bandit dimension {} does not match context dimension {CONTEXT_DIM}",
                state.dim()
            )));
        }
    }
    let ex = Expander {
        provider: assets.provider,
        lexicon: Some(assets.lexicon),
        story_prefix,
        cfg,
    };
    let scaling = cfg.scaling();
    let mut beam = vec![BeamCandidate::root()];
    let mut trace = GenerationTrace::default();
    let mut episode = Vec::new();
    while !all_finished(&beam) {
        let partial = beam
            .iter()
            .find(|c| !c.finished)
            .map(|c| c.tokens.as_slice())
            .unwrap_or(&[]);
        let context = build_context(
            partial,
            story_prefix,
            assets.lexicon,
            assets.provider,
            assets.trigger,
            &scaling,
        )?;
        let x = context.to_array();
        let (arm, width) = match &policy {
            WidthPolicy::Bandit { state, .. } => {
                let arm = state.select_arm(&x)?;
                (Some(arm), state.arms()[arm].beam_size)
            }
            WidthPolicy::Constant(w) => (None, *w),
        };
        let next = if counterfactual {
            let mut payoffs = std::collections::BTreeMap::new();
            let mut chosen = None;
            for &w in &cfg.beam_sizes {
                let b = ex.step(&beam, w)?;
                payoffs.insert(w, payoff(&b, w, &cfg.payoff)?);
                if w == width {
                    chosen = Some(b);
                }
            }
            episode.push(EpisodeStep {
                context: x.to_vec(),
                payoffs,
                chosen: width,
            });
            match chosen {
                Some(b) => b,
                None => ex.step(&beam, width)?,
            }
        } else {
            ex.step(&beam, width)?
        };
        let reward = payoff(&next, width, &cfg.payoff)?;
        if let (WidthPolicy::Bandit { state, learn: true }, Some(arm)) = (&mut policy, arm) {
            state.update_arm(arm, &x, reward)?;
        }
        trace.records.push(TraceRecord {
            pos: trace.records.len() + 1,
            beam: width,
            context: x,
            payoff: reward,
            best_arousal: next[0].arousal,
            best_ppl: next[0].ppl,
        });
        beam = next;
    }
    Ok(TwistDecode {
        candidates: beam,
        trace,
        episode,
    })
}

/// Mean width per position and empirical width-transition matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStats {
    pub beam_sizes: Vec<usize>,
    /// `(position, mean beam size)` for every position seen in any trace.
    pub mean_by_position: Vec<(usize, f64)>,
    /// Row `i` holds the probabilities of moving from `beam_sizes[i]` to each
    /// size; rows without observations are all zero.
    pub transitions: Vec<Vec<f64>>,
}

pub fn trace_statistics(traces: &[GenerationTrace], beam_sizes: &[usize]) -> Result<TraceStats> {
    if traces.is_empty() {
        return Err(Error::Invalid(
            "trace statistics need at least one trace".into(),
        ));
    }
    let k = beam_sizes.len();
    let index = |b: usize| {
        beam_sizes.iter().position(|&s| s == b).ok_or_else(|| {
            Error::Invalid(format!("trace uses beam size {b} outside {beam_sizes:?}"))
        })
    };
    let mut sums: Vec<(f64, usize)> = Vec::new();
    let mut counts = vec![vec![0usize; k]; k];
    for trace in traces {
        let beams = trace.beams();
        for (pos, &b) in beams.iter().enumerate() {
            index(b)?;
            if sums.len() <= pos {
                sums.push((0.0, 0));
            }
            sums[pos].0 += b as f64;
            sums[pos].1 += 1;
        }
        for w in beams.windows(2) {
            counts[index(w[0])?][index(w[1])?] += 1;
        }
    }
    let transitions = counts
        .iter()
        .map(|row| {
            let total: usize = row.iter().sum();
            row.iter()
                .map(|&c| {
                    if total == 0 {
                        0.0
                    } else {
                        c as f64 / total as f64
                    }
                })
                .collect()
        })
        .collect();
    Ok(TraceStats {
        beam_sizes: beam_sizes.to_vec(),
        mean_by_position: sums
            .iter()
            .enumerate()
            .map(|(i, &(s, n))| (i + 1, s / n as f64))
            .collect(),
        transitions,
    })
}

impl TraceStats {
    pub fn mean_beam_csv(&self) -> String {
        let mut out = String::from("position,mean_beam\n");
        for (pos, mean) in &self.mean_by_position {
            out.push_str(&format!("{pos},{mean}\n"));
        }
        out
    }

    pub fn transitions_csv(&self) -> String {
        let mut out = String::from("from");
        for b in &self.beam_sizes {
            out.push_str(&format!(",{b}"));
        }
        out.push('\n');
        for (b, row) in self.beam_sizes.iter().zip(&self.transitions) {
            out.push_str(&b.to_string());
            for p in row {
                out.push_str(&format!(",{p}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csvs(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [
            ("beam_by_position.csv", self.mean_beam_csv()),
            ("transitions.csv", self.transitions_csv()),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// One JSON record per token step; consecutive traces are concatenated.
pub fn traces_to_jsonl(traces: &[GenerationTrace]) -> Result<String> {
    let mut out = String::new();
    for rec in traces.iter().flat_map(|t| &t.records) {
        out.push_str(&serde_json::to_string(rec)?);
        out.push('\n');
    }
    Ok(out)
}

/// Inverse of [`traces_to_jsonl`]: a record with `pos == 1` starts a new trace.
pub fn parse_traces_jsonl(text: &str) -> Result<Vec<GenerationTrace>> {
    let mut traces: Vec<GenerationTrace> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: TraceRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let expected = traces.last().map_or(1, |t| t.records.len() + 1);
        if rec.pos == 1 {
            traces.push(GenerationTrace::default());
        } else if rec.pos != expected || traces.is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected position {expected} or 1, found {}", rec.pos),
            });
        }
        traces.last_mut().expect("pushed above").records.push(rec);
    }
    Ok(traces)
}
