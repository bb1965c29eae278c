//! End-to-end story generation, bandit training, ablation runs and
//! automatic evaluation.
//!
//! Seeds: a run-level seed `g` gives prompt `i` the story seed
//! `derive_seed(g, i)` (training uses `derive_seed(g, epoch * P + i)` for `P`
//! prompts). Inside a story the twist position is drawn with
//! `derive_seed(story_seed, TWIST_STREAM)`. Every ablation variant reuses the
//! same story seeds, so paired runs differ only in the variant.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bandit::{
    offline_regret, recorded_regret, write_episodes, EpisodeStep, LinUcbState, TriggerPredictor,
};
use crate::config::{Assets, Config};
use crate::decoder::{
    decode_sentence_fixed, decode_twist, trace_statistics, traces_to_jsonl, BeamCandidate,
    DecodeConfig, GenerationTrace, TwistAssets, TwistDecode, WidthPolicy,
};
use crate::error::{Error, Result};
use crate::lexicon::{arousal_score, AffectLexicon};
use crate::lm::{capped_perplexity, LanguageModel};
use crate::reranker::rerank;
use crate::tokens::{self, tokenize};
use crate::twist::{sample_position, TwistDistribution, RNG_ALGORITHM};

/// Stream index reserved for the twist-position draw.
pub const TWIST_STREAM: u64 = 0;

/// Header carried by every evaluation report.
pub const EVAL_NOTE: &str =
    "automatic metrics: perplexity and per-token arousal only; UNION and RUBER are not computed";

/// Child seed number `stream` of `seed`: the first output of ChaCha8 seeded
/// with `seed` on stream `stream`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// Bandit-sized twist beam and affective reranking.
    Full,
    /// Constant twist beam width with affective reranking.
    Fixed(usize),
    /// Bandit-sized twist beam, top log-probability candidate kept.
    NoRerank,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Full => f.write_str("full"),
            Variant::Fixed(w) => write!(f, "fixed{w}"),
            Variant::NoRerank => f.write_str("no_rerank"),
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "full" => Ok(Variant::Full),
            "no_rerank" => Ok(Variant::NoRerank),
            other => other
                .strip_prefix("fixed")
                .and_then(|w| w.parse::<usize>().ok())
                .filter(|&w| w >= 1)
                .map(Variant::Fixed)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown variant {other:?}"))),
        }
    }
}

impl Serialize for Variant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Variant {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Comma-separated variant list; an empty string gives an empty list.
pub fn parse_variants(list: &str) -> Result<Vec<Variant>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}

mod joined {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(tokens: &[String], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&tokens.join(" "))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
        Ok(crate::tokens::tokenize(&String::deserialize(d)?))
    }
}

mod joined_list {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(sentences: &[Vec<String>], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(sentences.iter().map(|t| t.join(" ")))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<String>>, D::Error> {
        let lines = Vec::<String>::deserialize(d)?;
        Ok(lines.iter().map(|l| crate::tokens::tokenize(l)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryMetadata {
    pub seed: u64,
    pub twist_seed: u64,
    pub rng: String,
    pub variant: Variant,
    pub config_hash: String,
    /// SHA-256 of the bandit state used for the twist sentence.
    pub bandit_hash: String,
    pub provider: String,
    pub trigger: String,
    pub twist_source: String,
}

/// A generated story. Sentences are stored as space-joined tokens, reserved
/// tokens included, so the file form round-trips exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryDraft {
    #[serde(with = "joined")]
    pub prompt: Vec<String>,
    /// Sentences 2..=n_target.
    #[serde(with = "joined_list")]
    pub sentences: Vec<Vec<String>>,
    pub n_it: u32,
    pub n_target: u32,
    pub trace_ref: String,
    pub trace: GenerationTrace,
    pub metadata: StoryMetadata,
}

impl StoryDraft {
    /// Every generated token after the prompt.
    pub fn generated_tokens(&self) -> Vec<String> {
        self.sentences.concat()
    }

    pub fn twist_sentence(&self) -> &[String] {
        &self.sentences[(self.n_it - 2) as usize]
    }

    /// One sentence per line, the twist line marked with a leading `*`.
    pub fn to_plain_text(&self) -> String {
        let mut out = tokens::render(&self.prompt);
        out.push('\n');
        for (i, s) in self.sentences.iter().enumerate() {
            if i + 2 == self.n_it as usize {
                out.push_str("* ");
            }
            out.push_str(&tokens::render(s));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

pub fn stories_to_jsonl(stories: &[StoryDraft]) -> Result<String> {
    let mut out = String::new();
    for s in stories {
        out.push_str(&s.to_json()?);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_stories_jsonl(text: &str) -> Result<Vec<StoryDraft>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let story: StoryDraft = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let expected = story.n_target.checked_sub(1).map(|n| n as usize);
        if story.n_it < 2 || story.n_it > story.n_target || expected != Some(story.sentences.len())
        {
            return Err(Error::Parse {
                line: i + 1,
                message: format!(
                    "story with n_it={} n_target={} has {} sentences",
                    story.n_it,
                    story.n_target,
                    story.sentences.len()
                ),
            });
        }
        if story.prompt.is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                message: "empty prompt".into(),
            });
        }
        out.push(story);
    }
    Ok(out)
}

/// Prompts file: one prompt per line, blank lines ignored.
pub fn load_prompts(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let prompts: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    if prompts.is_empty() {
        return Err(Error::Invalid(format!(
            "{} contains no prompts",
            path.display()
        )));
    }
    Ok(prompts)
}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Borrowed view of loaded assets plus the decoding settings of one run.
pub struct Generator<'a> {
    pub provider: &'a dyn LanguageModel,
    pub lexicon: &'a AffectLexicon,
    pub trigger: &'a dyn TriggerPredictor,
    pub twist: &'a TwistDistribution,
    pub twist_source: String,
    pub decode: DecodeConfig,
    pub n_target: u32,
    pub config_hash: String,
}

/// Output of one generation, with the counterfactual episode when requested.
#[derive(Debug, Clone)]
pub struct Generated {
    pub draft: StoryDraft,
    pub episode: Vec<EpisodeStep>,
}

impl<'a> Generator<'a> {
    pub fn new(assets: &'a Assets, cfg: &Config) -> Result<Self> {
        Self::from_parts(
            &*assets.provider,
            &assets.lexicon,
            &*assets.trigger,
            &assets.twist,
            assets.twist_source.clone(),
            cfg.decode_config(),
            cfg.decode.n_target,
            cfg.fingerprint(),
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        provider: &'a dyn LanguageModel,
        lexicon: &'a AffectLexicon,
        trigger: &'a dyn TriggerPredictor,
        twist: &'a TwistDistribution,
        twist_source: String,
        decode: DecodeConfig,
        n_target: u32,
        config_hash: String,
    ) -> Result<Self> {
        decode.validate()?;
        if n_target < 2 {
            return Err(Error::InvalidConfig("n_target must be >= 2".into()));
        }
        if twist.n_max != n_target {
            return Err(Error::InvalidConfig(format!(
                "twist distribution covers {} sentences but n_target is {n_target}",
                twist.n_max
            )));
        }
        Ok(Generator {
            provider,
            lexicon,
            trigger,
            twist,
            twist_source,
            decode,
            n_target,
            config_hash,
        })
    }

    /// Generates one story. With `learn`, the bandit is updated online while
    /// the twist sentence is decoded.
    pub fn generate(
        &self,
        prompt: &str,
        seed: u64,
        variant: Variant,
        bandit: &mut LinUcbState,
        learn: bool,
        counterfactual: bool,
    ) -> Result<Generated> {
        let prompt_tokens = tokenize(prompt);
        if prompt_tokens.is_empty() {
            return Err(Error::EmptyPrompt);
        }
        let twist_seed = derive_seed(seed, TWIST_STREAM);
        let n_it = sample_position(self.twist, twist_seed);
        let bandit_hash = sha256_hex(&bandit.to_json()?);
        let mut prefix = prompt_tokens.clone();
        let mut sentences = Vec::with_capacity(self.n_target as usize - 1);
        let mut trace = GenerationTrace::default();
        let mut episode = Vec::new();
        for pos in 2..=self.n_target {
            let sentence = if pos == n_it {
                let out =
                    self.decode_twist_sentence(&prefix, variant, bandit, learn, counterfactual)?;
                trace = out.1.trace;
                episode = out.1.episode;
                out.0
            } else {
                decode_sentence_fixed(self.provider, &prefix, None, &self.decode)?.tokens
            };
            prefix.extend_from_slice(&sentence);
            sentences.push(sentence);
        }
        let draft = StoryDraft {
            prompt: prompt_tokens,
            sentences,
            n_it,
            n_target: self.n_target,
            trace_ref: format!(
                "{}:{seed}:{variant}",
                &self.config_hash[..12.min(self.config_hash.len())]
            ),
            trace,
            metadata: StoryMetadata {
                seed,
                twist_seed,
                rng: RNG_ALGORITHM.to_string(),
                variant,
                config_hash: self.config_hash.clone(),
                bandit_hash,
                provider: self.provider.describe(),
                trigger: self.trigger.describe(),
                twist_source: self.twist_source.clone(),
            },
        };
        Ok(Generated { draft, episode })
    }

    fn decode_twist_sentence(
        &self,
        prefix: &[String],
        variant: Variant,
        bandit: &mut LinUcbState,
        learn: bool,
        counterfactual: bool,
    ) -> Result<(Vec<String>, TwistDecode)> {
        let assets = TwistAssets {
            provider: self.provider,
            lexicon: self.lexicon,
            trigger: self.trigger,
        };
        let policy = match variant {
            Variant::Fixed(w) => WidthPolicy::Constant(w),
            Variant::Full | Variant::NoRerank => WidthPolicy::Bandit {
                state: bandit,
                learn,
            },
        };
        let out = decode_twist(&assets, prefix, policy, &self.decode, counterfactual)?;
        let finished: Vec<BeamCandidate> = out
            .candidates
            .iter()
            .filter(|c| c.finished)
            .cloned()
            .collect();
        let chosen = match variant {
            Variant::NoRerank => finished[0].tokens.clone(),
            _ => {
                rerank(&finished, prefix, self.lexicon, &self.decode.norm())?
                    .chosen
                    .tokens
            }
        };
        Ok((chosen, out))
    }
}

/// Runs `f` over `items` on up to `workers` threads; results keep input order.
fn par_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|scope| {
        for (c, out) in slots.chunks_mut(chunk).enumerate() {
            let f = &f;
            scope.spawn(move || {
                for (j, slot) in out.iter_mut().enumerate() {
                    let i = c * chunk + j;
                    *slot = Some(f(i, &items[i]));
                }
            });
        }
    });
    slots
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Generates one story per prompt without learning. Each story gets a clone
/// of `bandit` and the seed `derive_seed(seed, i)`.
pub fn generate_batch(
    gen: &Generator<'_>,
    prompts: &[String],
    seed: u64,
    variant: Variant,
    bandit: &LinUcbState,
    counterfactual: bool,
) -> Result<Vec<Generated>> {
    par_map(prompts, default_workers(), |i, prompt| {
        let mut state = bandit.clone();
        gen.generate(
            prompt,
            derive_seed(seed, i as u64),
            variant,
            &mut state,
            false,
            counterfactual,
        )
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    /// Mean twist-sentence payoff per epoch.
    pub epoch_mean_payoff: Vec<f64>,
}

/// Online LinUCB training: every prompt of every epoch generates a full story
/// with learning enabled on the twist sentence.
pub fn train_bandit(
    gen: &Generator<'_>,
    prompts: &[String],
    epochs: usize,
    seed: u64,
    bandit: &mut LinUcbState,
) -> Result<TrainingLog> {
    if epochs == 0 {
        return Err(Error::InvalidConfig("epochs must be >= 1".into()));
    }
    if prompts.is_empty() {
        return Err(Error::Invalid("no training prompts".into()));
    }
    let mut log = TrainingLog {
        epoch_mean_payoff: Vec::with_capacity(epochs),
    };
    for epoch in 0..epochs {
        let mut payoffs = Vec::with_capacity(prompts.len());
        for (i, prompt) in prompts.iter().enumerate() {
            let story_seed = derive_seed(seed, (epoch * prompts.len() + i) as u64);
            let out = gen.generate(prompt, story_seed, Variant::Full, bandit, true, false)?;
            let records = &out.draft.trace.records;
            payoffs.push(records.iter().map(|r| r.payoff).sum::<f64>() / records.len() as f64);
        }
        let mean = stable_mean(&payoffs);
        log::info!("epoch {}: mean payoff {mean:.6}", epoch + 1);
        log.epoch_mean_payoff.push(mean);
    }
    Ok(log)
}

/// Mean computed over the values in sorted order, so the result does not
/// depend on the order they arrive in.
fn stable_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryScore {
    pub perplexity: f64,
    pub arousal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub note: String,
    pub variant: Option<Variant>,
    pub stories: Vec<StoryScore>,
    pub mean_perplexity: f64,
    pub mean_arousal: f64,
}

/// Perplexity of each story's generated tokens given its prompt, and the
/// per-token arousal of the generated words.
pub fn evaluate(
    stories: &[StoryDraft],
    provider: &dyn LanguageModel,
    lexicon: &AffectLexicon,
    cfg: &DecodeConfig,
) -> Result<EvalReport> {
    if stories.is_empty() {
        return Err(Error::Invalid("no stories to evaluate".into()));
    }
    let scores: Vec<StoryScore> = par_map(stories, default_workers(), |_, s| {
        let generated = s.generated_tokens();
        let words: Vec<String> = generated
            .iter()
            .filter(|t| !tokens::is_reserved(t))
            .cloned()
            .collect();
        Ok(StoryScore {
            perplexity: capped_perplexity(provider, &s.prompt, &generated, cfg.ppl_cap)?,
            arousal: arousal_score(&words, lexicon, &cfg.norm()),
        })
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let variants: Vec<Variant> = stories.iter().map(|s| s.metadata.variant).collect();
    let variant = variants
        .iter()
        .all(|v| *v == variants[0])
        .then_some(variants[0]);
    Ok(report_from_scores(scores, variant))
}

pub fn report_from_scores(stories: Vec<StoryScore>, variant: Option<Variant>) -> EvalReport {
    let ppl: Vec<f64> = stories.iter().map(|s| s.perplexity).collect();
    let aro: Vec<f64> = stories.iter().map(|s| s.arousal).collect();
    EvalReport {
        note: EVAL_NOTE.to_string(),
        variant,
        mean_perplexity: stable_mean(&ppl),
        mean_arousal: stable_mean(&aro),
        stories,
    }
}

#[derive(Debug, Clone)]
pub struct AblationRun {
    pub variant: Variant,
    pub report: EvalReport,
    pub stories: Vec<StoryDraft>,
    /// Per-step payoffs of every arm; recorded for bandit-driven variants.
    pub episode: Vec<EpisodeStep>,
}

/// Every variant over the same prompts and story seeds.
pub fn run_ablation(
    gen: &Generator<'_>,
    prompts: &[String],
    variants: &[Variant],
    seed: u64,
    bandit: &LinUcbState,
) -> Result<Vec<AblationRun>> {
    if prompts.is_empty() {
        return Err(Error::Invalid("no prompts".into()));
    }
    let mut runs = Vec::with_capacity(variants.len());
    for &variant in variants {
        let counterfactual = variant == Variant::Full;
        let outs = generate_batch(gen, prompts, seed, variant, bandit, counterfactual)?;
        let mut stories = Vec::with_capacity(outs.len());
        let mut episode = Vec::new();
        for out in outs {
            stories.push(out.draft);
            episode.extend(out.episode);
        }
        let mut report = evaluate(&stories, gen.provider, gen.lexicon, &gen.decode)?;
        report.variant = Some(variant);
        runs.push(AblationRun {
            variant,
            report,
            stories,
            episode,
        });
    }
    Ok(runs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretSummary {
    pub steps: usize,
    /// Regret of the widths the bandit actually chose.
    pub bandit: f64,
    /// Regret of always using each single width.
    pub constant: Vec<(usize, f64)>,
}

pub fn regret_summary(episode: &[EpisodeStep], beam_sizes: &[usize]) -> Result<RegretSummary> {
    let constant = beam_sizes
        .iter()
        .map(|&w| Ok((w, offline_regret(episode, beam_sizes, |_, _| Ok(w))?)))
        .collect::<Result<_>>()?;
    Ok(RegretSummary {
        steps: episode.len(),
        bandit: recorded_regret(episode, beam_sizes)?,
        constant,
    })
}

/// Writes `<variant>.stories.jsonl` and `<variant>.report.json` per variant,
/// `summary.json`, and for the full variant `traces.jsonl`,
/// `beam_by_position.csv`, `transitions.csv`, `episodes.jsonl` and
/// `regret.json`.
pub fn write_ablation(
    runs: &[AblationRun],
    beam_sizes: &[usize],
    dir: impl AsRef<Path>,
) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, body: String| {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| Error::io(&p, e))
    };
    let mut summary = Vec::new();
    for run in runs {
        write(
            &format!("{}.stories.jsonl", run.variant),
            stories_to_jsonl(&run.stories)?,
        )?;
        write(
            &format!("{}.report.json", run.variant),
            serde_json::to_string_pretty(&run.report)?,
        )?;
        summary.push(serde_json::json!({
            "variant": run.variant,
            "stories": run.stories.len(),
            "mean_perplexity": run.report.mean_perplexity,
            "mean_arousal": run.report.mean_arousal,
        }));
        if run.variant == Variant::Full {
            let traces: Vec<GenerationTrace> =
                run.stories.iter().map(|s| s.trace.clone()).collect();
            write("traces.jsonl", traces_to_jsonl(&traces)?)?;
            trace_statistics(&traces, beam_sizes)?.write_csvs(dir)?;
            write_episodes(&run.episode, dir.join("episodes.jsonl"))?;
            write(
                "regret.json",
                serde_json::to_string_pretty(&regret_summary(&run.episode, beam_sizes)?)?,
            )?;
        }
    }
    write(
        "summary.json",
        serde_json::to_string_pretty(
            &serde_json::json!({ "note": EVAL_NOTE, "variants": summary }),
        )?,
    )
}
