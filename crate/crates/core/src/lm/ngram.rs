//! Add-k smoothed n-gram model with highest-order-seen back-off.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LanguageModel, TokenDistribution};
use crate::error::{Error, Result};
use crate::tokens::{self, BOS, EOS, UNK};

const BOS_ID: u32 = 0;
const EOS_ID: u32 = 1;
const UNK_ID: u32 = 2;
const FORMAT: &str = "twistbeam-ngram";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
struct ContextCounts {
    total: u64,
    /// Continuations sorted by count descending, then token id ascending.
    ranked: Vec<(u32, u64)>,
    lookup: HashMap<u32, u64>,
}

impl ContextCounts {
    fn from_map(map: HashMap<u32, u64>) -> Option<Self> {
        let mut ranked: Vec<(u32, u64)> = map.iter().map(|(&w, &c)| (w, c)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let total = ranked
            .iter()
            .try_fold(0u64, |acc, &(_, c)| acc.checked_add(c))?;
        Some(ContextCounts {
            total,
            ranked,
            lookup: map,
        })
    }
}

/// Token ids are assigned in [`tokens::token_order`], so comparing ids
/// compares tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel {
    order: usize,
    smoothing_k: f64,
    vocab: Vec<String>,
    index: HashMap<String, u32>,
    counts: HashMap<Vec<u32>, ContextCounts>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    order: usize,
    smoothing_k: f64,
    vocab: Vec<String>,
    counts: Vec<CountRow>,
}

#[derive(Serialize, Deserialize)]
struct CountRow {
    context: Vec<String>,
    next: BTreeMap<String, u64>,
}

impl NgramModel {
    pub fn train_file(corpus: impl AsRef<Path>, order: usize, smoothing_k: f64) -> Result<Self> {
        let path = corpus.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::train(&text, order, smoothing_k)
    }

    /// Trains on `text`, one story per line.
    pub fn train(text: &str, order: usize, smoothing_k: f64) -> Result<Self> {
        validate_params(order, smoothing_k)?;
        let stories: Vec<Vec<&str>> = text
            .lines()
            .map(|l| l.split_whitespace().collect::<Vec<_>>())
            .filter(|t| !t.is_empty())
            .collect();
        if stories.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let regular: Vec<String> = stories
            .iter()
            .flatten()
            .filter(|t| !tokens::is_reserved(t))
            .map(|t| t.to_string())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut model = Self::with_vocab(order, smoothing_k, regular)?;

        let mut raw: HashMap<Vec<u32>, HashMap<u32, u64>> = HashMap::new();
        for story in &stories {
            let mut seq = vec![BOS_ID; order - 1];
            seq.extend(story.iter().map(|t| model.id(t)));
            seq.push(EOS_ID);
            for i in (order - 1)..seq.len() {
                if seq[i] == BOS_ID {
                    continue;
                }
                for m in 0..order {
                    let ctx = seq[i - m..i].to_vec();
                    *raw.entry(ctx).or_default().entry(seq[i]).or_default() += 1;
                }
            }
        }
        model.counts = raw
            .into_iter()
            .map(|(ctx, m)| {
                let cc = ContextCounts::from_map(m).expect("corpus counts fit in u64");
                (ctx, cc)
            })
            .collect();
        Ok(model)
    }

    fn with_vocab(order: usize, smoothing_k: f64, regular: Vec<String>) -> Result<Self> {
        let mut vocab = vec![BOS.to_string(), EOS.to_string(), UNK.to_string()];
        vocab.extend(regular);
        let index: HashMap<String, u32> = vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        if index.len() != vocab.len() {
            return Err(Error::Invalid("duplicate vocabulary entries".into()));
        }
        Ok(NgramModel {
            order,
            smoothing_k,
            vocab,
            index,
            counts: HashMap::new(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing_k(&self) -> f64 {
        self.smoothing_k
    }

    /// Number of tokens the model can predict: every vocabulary entry except BOS.
    pub fn predictable_size(&self) -> usize {
        self.vocab.len() - 1
    }

    /// All predictable tokens in tie-break order.
    pub fn predictable_tokens(&self) -> &[String] {
        &self.vocab[1..]
    }

    fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    /// Longest suffix of the BOS-padded prefix that was observed in training.
    fn context_for(&self, prefix: &[u32]) -> &ContextCounts {
        let want = self.order - 1;
        let pad = want.saturating_sub(prefix.len());
        let mut ctx: Vec<u32> = vec![BOS_ID; pad];
        ctx.extend_from_slice(&prefix[prefix.len().saturating_sub(want)..]);
        for start in 0..=ctx.len() {
            if let Some(c) = self.counts.get(&ctx[start..]) {
                if c.total > 0 {
                    return c;
                }
            }
        }
        unreachable!("unigram counts exist for any non-empty corpus")
    }

    fn prob(&self, counts: &ContextCounts, w: u32) -> f64 {
        let c = counts.lookup.get(&w).copied().unwrap_or(0) as f64;
        let v = self.predictable_size() as f64;
        (c + self.smoothing_k) / (counts.total as f64 + self.smoothing_k * v)
    }

    fn ids(&self, tokens: &[String]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    /// Probabilities of every predictable token after `prefix`, in token order.
    pub fn full_distribution(&self, prefix: &[String]) -> Vec<(String, f64)> {
        let counts = self.context_for(&self.ids(prefix));
        (1..self.vocab.len() as u32)
            .map(|w| (self.vocab[w as usize].clone(), self.prob(counts, w)))
            .collect()
    }

    pub fn probability(&self, prefix: &[String], token: &str) -> f64 {
        let w = self.id(token);
        if w == BOS_ID {
            return 0.0;
        }
        self.prob(self.context_for(&self.ids(prefix)), w)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut counts: Vec<CountRow> = self
            .counts
            .iter()
            .map(|(ctx, c)| CountRow {
                context: ctx
                    .iter()
                    .map(|&i| self.vocab[i as usize].clone())
                    .collect(),
                next: c
                    .lookup
                    .iter()
                    .map(|(&w, &n)| (self.vocab[w as usize].clone(), n))
                    .collect(),
            })
            .collect();
        counts.sort_by(|a, b| a.context.cmp(&b.context));
        let file = ModelFile {
            format: FORMAT.into(),
            version: VERSION,
            order: self.order,
            smoothing_k: self.smoothing_k,
            vocab: self.vocab[3..].to_vec(),
            counts,
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != FORMAT || file.version != VERSION {
            return Err(Error::Invalid(format!(
                "unsupported model format {} v{}",
                file.format, file.version
            )));
        }
        validate_params(file.order, file.smoothing_k)?;
        if file
            .vocab
            .iter()
            .any(|t| tokens::is_reserved(t) || t.is_empty())
        {
            return Err(Error::Invalid(
                "vocabulary lists a reserved or empty token".into(),
            ));
        }
        let mut regular = file.vocab;
        regular.sort_by(|a, b| tokens::token_order(a, b));
        let mut model = Self::with_vocab(file.order, file.smoothing_k, regular)?;
        let lookup = |t: &str| -> Result<u32> {
            model
                .index
                .get(t)
                .copied()
                .ok_or_else(|| Error::Invalid(format!("count table uses unknown token {t:?}")))
        };
        let mut counts = HashMap::new();
        for row in file.counts {
            if row.context.len() >= file.order {
                return Err(Error::Invalid("context longer than order - 1".into()));
            }
            let ctx = row
                .context
                .iter()
                .map(|t| lookup(t))
                .collect::<Result<Vec<_>>>()?;
            let mut next = HashMap::new();
            for (t, n) in row.next {
                let w = lookup(&t)?;
                if w == BOS_ID {
                    return Err(Error::Invalid("BOS cannot be a continuation".into()));
                }
                if n > 0 {
                    next.insert(w, n);
                }
            }
            let cc = ContextCounts::from_map(next)
                .ok_or_else(|| Error::Invalid("context count overflow".into()))?;
            if counts.insert(ctx, cc).is_some() {
                return Err(Error::Invalid("duplicate context row".into()));
            }
        }
        if counts
            .get(&Vec::new())
            .is_none_or(|c: &ContextCounts| c.total == 0)
        {
            return Err(Error::Invalid("model has no unigram counts".into()));
        }
        model.counts = counts;
        Ok(model)
    }
}

/// Largest supported n-gram order.
pub const MAX_ORDER: usize = 32;

fn validate_params(order: usize, smoothing_k: f64) -> Result<()> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(Error::InvalidConfig(format!(
            "n-gram order must be in 1..={MAX_ORDER}, got {order}"
        )));
    }
    if !(smoothing_k.is_finite() && smoothing_k >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "smoothing_k must be finite and >= 0, got {smoothing_k}"
        )));
    }
    Ok(())
}

impl LanguageModel for NgramModel {
    fn next_token_distribution(
        &self,
        prefix: &[String],
        top_k: usize,
    ) -> Result<TokenDistribution> {
        if top_k == 0 {
            return Err(Error::Invalid("top_k must be >= 1".into()));
        }
        let counts = self.context_for(&self.ids(prefix));
        let want = top_k.min(self.predictable_size());
        let mut picked: Vec<u32> = counts.ranked.iter().take(want).map(|&(w, _)| w).collect();
        if picked.len() < want {
            // Unseen tokens all share the same (smoothed) probability, so they
            // follow the seen ones in plain token order.
            let seen: HashSet<u32> = counts.ranked.iter().map(|&(w, _)| w).collect();
            picked.extend(
                (1..self.vocab.len() as u32)
                    .filter(|w| !seen.contains(w))
                    .take(want - picked.len()),
            );
        }
        let logprobs = picked.iter().map(|&w| self.prob(counts, w).ln()).collect();
        let toks = picked
            .iter()
            .map(|&w| self.vocab[w as usize].clone())
            .collect();
        TokenDistribution::new(toks, logprobs)
    }

    fn sequence_perplexity(&self, context: &[String], target: &[String]) -> Result<f64> {
        if target.is_empty() {
            return Err(Error::Invalid("perplexity target must be non-empty".into()));
        }
        let mut ids = self.ids(context);
        let mut nll = 0.0;
        for t in target {
            let w = self.id(t);
            let p = if w == BOS_ID {
                0.0
            } else {
                self.prob(self.context_for(&ids), w)
            };
            if p <= 0.0 {
                return Ok(f64::INFINITY);
            }
            nll -= p.ln();
            ids.push(w);
        }
        Ok((nll / target.len() as f64).exp())
    }

    fn describe(&self) -> String {
        format!(
            "ngram(order={}, k={}, vocab={})",
            self.order,
            self.smoothing_k,
            self.predictable_size()
        )
    }
}
