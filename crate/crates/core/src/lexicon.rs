//! Valence/arousal lexicon and length-normalized affect scores.
//!
//! Scores follow the cumulative-sum-over-length-penalty form: a sequence of
//! `n` tokens scores `sum(score(w)) / lp(n)` with
//! `lp(n) = ((5 + n) / 6) ^ lambda`. Tokens missing from the lexicon
//! contribute zero.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffectEntry {
    pub valence: f64,
    pub arousal: f64,
}

/// Tallies collected while reading a lexicon file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub clamped: usize,
    pub duplicates: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Default)]
pub struct AffectLexicon {
    entries: HashMap<String, AffectEntry>,
    report: LoadReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationConfig {
    pub lambda: f64,
}

impl NormalizationConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        let cfg = NormalizationConfig { lambda };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda.is_finite() && self.lambda > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "lambda must be finite and positive, got {}",
                self.lambda
            )))
        }
    }
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        NormalizationConfig { lambda: 1.5 }
    }
}

/// Lowercases and strips leading/trailing non-alphanumeric characters.
pub fn normalize_token(token: &str) -> String {
    token
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

pub fn length_penalty(n: usize, cfg: &NormalizationConfig) -> f64 {
    ((5.0 + n as f64) / 6.0).powf(cfg.lambda)
}

impl AffectLexicon {
    pub fn from_entries<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = (S, AffectEntry)>,
        S: AsRef<str>,
    {
        let mut lex = AffectLexicon::default();
        for (term, entry) in entries {
            lex.insert(normalize_token(term.as_ref()), entry);
        }
        lex
    }

    pub fn load(path: impl AsRef<Path>, strict: bool) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_vad_tsv(&text, strict)
    }

    /// Parses the `term<TAB>valence<TAB>arousal[<TAB>dominance]` layout.
    ///
    /// In lenient mode malformed rows are skipped and out-of-range scores
    /// are clamped to `[0, 1]`; strict mode turns either into a parse error.
    pub fn parse_vad_tsv(text: &str, strict: bool) -> Result<Self> {
        let mut lex = AffectLexicon::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if idx == 0 && fields.len() >= 2 && fields[1].trim().parse::<f64>().is_err() {
                continue; // header
            }
            match parse_row(&fields) {
                Ok((term, mut entry)) => {
                    let in_range = |x: f64| (0.0..=1.0).contains(&x);
                    if !in_range(entry.valence) || !in_range(entry.arousal) {
                        if strict {
                            return Err(Error::Parse {
                                line: line_no,
                                message: "score outside [0, 1]".into(),
                            });
                        }
                        entry.valence = entry.valence.clamp(0.0, 1.0);
                        entry.arousal = entry.arousal.clamp(0.0, 1.0);
                        lex.report.clamped += 1;
                    }
                    lex.insert(term, entry);
                }
                Err(message) => {
                    if strict {
                        return Err(Error::Parse {
                            line: line_no,
                            message,
                        });
                    }
                    lex.report.skipped += 1;
                }
            }
        }
        if lex.report.clamped > 0 || lex.report.skipped > 0 {
            log::warn!(
                "lexicon: {} rows clamped, {} rows skipped",
                lex.report.clamped,
                lex.report.skipped
            );
        }
        Ok(lex)
    }

    fn insert(&mut self, term: String, entry: AffectEntry) {
        if self.entries.insert(term, entry).is_some() {
            self.report.duplicates += 1;
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn report(&self) -> &LoadReport {
        &self.report
    }

    pub fn get(&self, token: &str) -> Option<&AffectEntry> {
        self.entries.get(&normalize_token(token))
    }

    /// Arousal of a single token, 0 when absent.
    pub fn arousal(&self, token: &str) -> f64 {
        self.get(token).map_or(0.0, |e| e.arousal)
    }

    /// Valence of a single token, 0 when absent.
    pub fn valence(&self, token: &str) -> f64 {
        self.get(token).map_or(0.0, |e| e.valence)
    }

    pub fn max_arousal(&self) -> f64 {
        self.entries.values().map(|e| e.arousal).fold(0.0, f64::max)
    }

    /// Entries sorted by term, for serialization and fingerprinting.
    pub fn sorted_entries(&self) -> Vec<(&str, &AffectEntry)> {
        let mut v: Vec<_> = self.entries.iter().map(|(k, e)| (k.as_str(), e)).collect();
        v.sort_by(|a, b| a.0.cmp(b.0));
        v
    }
}

fn parse_row(fields: &[&str]) -> std::result::Result<(String, AffectEntry), String> {
    if fields.len() < 3 {
        return Err(format!(
            "expected at least 3 fields, found {}",
            fields.len()
        ));
    }
    let term = normalize_token(fields[0].trim());
    if term.is_empty() || term.chars().any(char::is_whitespace) {
        return Err(format!("invalid term {:?}", fields[0]));
    }
    let num = |s: &str, what: &str| -> std::result::Result<f64, String> {
        match s.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(format!("{what} is not a finite number: {s:?}")),
        }
    };
    let valence = num(fields[1], "valence")?;
    let arousal = num(fields[2], "arousal")?;
    Ok((term, AffectEntry { valence, arousal }))
}

fn score_sum(tokens: &[String], f: impl Fn(&str) -> f64) -> f64 {
    tokens.iter().map(|t| f(t)).sum()
}

pub fn arousal_score(tokens: &[String], lexicon: &AffectLexicon, cfg: &NormalizationConfig) -> f64 {
    if tokens.is_empty() {
        return 0.0;
    }
    score_sum(tokens, |t| lexicon.arousal(t)) / length_penalty(tokens.len(), cfg)
}

pub fn valence_score(tokens: &[String], lexicon: &AffectLexicon, cfg: &NormalizationConfig) -> f64 {
    if tokens.is_empty() {
        return 0.0;
    }
    score_sum(tokens, |t| lexicon.valence(t)) / length_penalty(tokens.len(), cfg)
}
