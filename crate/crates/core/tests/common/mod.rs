#![allow(dead_code)]

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use statrs::distribution::{Binomial, DiscreteCDF};
use twistbeam::lexicon::{AffectEntry, AffectLexicon};
use twistbeam::lm::{LanguageModel, NgramModel, TokenDistribution};
use twistbeam::tokens::{token_order, EOS};

/// Random next-token model over a tiny vocabulary whose distribution depends
/// on the whole prefix.
pub struct ToyModel {
    pub vocab: Vec<String>,
    pub seed: u64,
}

impl ToyModel {
    /// `size` tokens: EOS plus `size - 1` letters.
    pub fn new(size: usize, seed: u64) -> Self {
        let mut vocab = vec![EOS.to_string()];
        vocab.extend((0..size - 1).map(|i| ((b'a' + i as u8) as char).to_string()));
        ToyModel { vocab, seed }
    }

    pub fn logprobs(&self, prefix: &[String]) -> Vec<(String, f64)> {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        for t in prefix {
            h.update(t.as_bytes());
            h.update([0]);
        }
        let digest = h.finalize();
        let mut rng = ChaCha8Rng::from_seed(digest.into());
        let weights: Vec<f64> = self
            .vocab
            .iter()
            .map(|_| rng.random::<f64>() + 0.05)
            .collect();
        let total: f64 = weights.iter().sum();
        self.vocab
            .iter()
            .zip(weights)
            .map(|(t, w)| (t.clone(), (w / total).ln()))
            .collect()
    }
}

impl LanguageModel for ToyModel {
    fn next_token_distribution(
        &self,
        prefix: &[String],
        top_k: usize,
    ) -> twistbeam::Result<TokenDistribution> {
        let mut pairs = self.logprobs(prefix);
        pairs.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| token_order(&a.0, &b.0)));
        pairs.truncate(top_k);
        let (tokens, lps) = pairs.into_iter().unzip();
        TokenDistribution::new(tokens, lps)
    }

    fn sequence_perplexity(&self, context: &[String], target: &[String]) -> twistbeam::Result<f64> {
        let mut prefix = context.to_vec();
        let mut nll = 0.0;
        for t in target {
            let lp = self
                .logprobs(&prefix)
                .into_iter()
                .find(|(w, _)| w == t)
                .map_or(f64::NEG_INFINITY, |p| p.1);
            nll -= lp;
            prefix.push(t.clone());
        }
        Ok((nll / target.len() as f64).exp())
    }

    fn describe(&self) -> String {
        format!("toy(seed={})", self.seed)
    }
}

/// Best length-normalized log-probability over every complete sentence: a
/// sentence ends at EOS or after `cap` tokens.
pub fn exhaustive_best(model: &ToyModel, prefix: &[String], cap: usize) -> (f64, Vec<String>) {
    fn walk(
        model: &ToyModel,
        prefix: &mut Vec<String>,
        sent: &mut Vec<String>,
        lp: f64,
        cap: usize,
        best: &mut (f64, Vec<String>),
    ) {
        for (tok, l) in model.logprobs(prefix) {
            let total = lp + l;
            sent.push(tok.clone());
            if tok == EOS || sent.len() == cap {
                let score = total / sent.len() as f64;
                if score > best.0 {
                    *best = (score, sent.clone());
                }
            } else {
                prefix.push(tok.clone());
                walk(model, prefix, sent, total, cap, best);
                prefix.pop();
            }
            sent.pop();
        }
    }
    let mut best = (f64::NEG_INFINITY, Vec::new());
    walk(
        model,
        &mut prefix.to_vec(),
        &mut Vec::new(),
        0.0,
        cap,
        &mut best,
    );
    best
}

pub const NEUTRAL: [&str; 10] = [
    "breakfast",
    "chair",
    "garden",
    "lamp",
    "letter",
    "market",
    "morning",
    "paper",
    "table",
    "window",
];

pub const INTENSE: [&str; 20] = [
    "ambush",
    "attack",
    "blast",
    "chaos",
    "collapse",
    "crash",
    "earthquake",
    "explosion",
    "fire",
    "fury",
    "horror",
    "kidnapping",
    "massacre",
    "murder",
    "panic",
    "riot",
    "scream",
    "storm",
    "terror",
    "violence",
];

/// Constructed world for ablation trends. Every story is five sentences of the
/// form `W happened .`. After `.` the bigram model ranks EOS first (0.2), the
/// ten neutral words next (20/300 each) and the twenty high-arousal words
/// after them (2/300 each), so they sit between ranks 12 and 31.
pub struct ArousalWorld {
    pub model: NgramModel,
    pub lexicon: AffectLexicon,
}

pub fn arousal_world() -> ArousalWorld {
    let mut starts: Vec<&str> = Vec::new();
    for w in NEUTRAL {
        starts.extend(std::iter::repeat_n(w, 20));
    }
    for w in INTENSE {
        starts.extend(std::iter::repeat_n(w, 2));
    }
    starts.shuffle(&mut ChaCha8Rng::seed_from_u64(17));
    let mut corpus = String::new();
    for (line, chunk) in starts.chunks(4).enumerate() {
        corpus.push_str(&format!("{} happened .", NEUTRAL[line % NEUTRAL.len()]));
        for w in chunk {
            corpus.push_str(&format!(" {w} happened ."));
        }
        corpus.push('\n');
    }
    let model = NgramModel::train(&corpus, 2, 0.0).expect("world trains");
    let lexicon = AffectLexicon::from_entries(INTENSE.iter().map(|w| {
        (
            *w,
            AffectEntry {
                valence: 0.0,
                arousal: 0.9,
            },
        )
    }));
    ArousalWorld { model, lexicon }
}

pub fn world_prompts(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| format!("{} happened .", NEUTRAL[i % NEUTRAL.len()]))
        .collect()
}

/// One-sided paired sign test of `a > b`; ties are dropped. Returns
/// (wins, losses, p-value).
pub fn sign_test(a: &[f64], b: &[f64]) -> (u64, u64, f64) {
    let mut wins = 0;
    let mut losses = 0;
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Greater) => wins += 1,
            Some(Ordering::Less) => losses += 1,
            _ => {}
        }
    }
    let n = wins + losses;
    if n == 0 {
        return (0, 0, 1.0);
    }
    let binom = Binomial::new(0.5, n).expect("valid binomial");
    let p = if wins == 0 { 1.0 } else { binom.sf(wins - 1) };
    (wins, losses, p)
}

pub fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}
