//! Distribution over the sentence index that carries the twist.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the generator behind [`sample_position`], recorded in story metadata.
pub const RNG_ALGORITHM: &str = "chacha8/rand_chacha-0.9";

const NORMALIZATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwistDistribution {
    pub n_max: u32,
    pub probs: BTreeMap<u32, f64>,
}

impl TwistDistribution {
    /// Validates support and total mass; totals within 1e-6 of one are
    /// renormalized.
    pub fn new(n_max: u32, probs: BTreeMap<u32, f64>) -> Result<Self> {
        if n_max < 2 {
            return Err(Error::Invalid(format!(
                "story length {n_max} leaves no room for a twist"
            )));
        }
        for (&pos, &p) in &probs {
            if !(2..=n_max).contains(&pos) {
                return Err(Error::Support {
                    position: pos,
                    n_max,
                });
            }
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::Invalid(format!(
                    "probability {p} at position {pos} is invalid"
                )));
            }
        }
        let sum: f64 = probs.values().sum();
        let gap = (sum - 1.0).abs();
        if gap.is_nan() || gap > NORMALIZATION_TOLERANCE {
            return Err(Error::NormalizationGap { sum });
        }
        let probs = if gap > 1e-12 {
            probs.into_iter().map(|(k, p)| (k, p / sum)).collect()
        } else {
            probs
        };
        Ok(TwistDistribution { n_max, probs })
    }

    /// Uniform over `2..=n_max-1`, or the single slot `2` for two-sentence
    /// stories.
    pub fn uniform_default(n_max: u32) -> Result<Self> {
        if n_max < 2 {
            return Err(Error::Invalid(format!(
                "story length {n_max} leaves no room for a twist"
            )));
        }
        let hi = if n_max > 2 { n_max - 1 } else { 2 };
        let n = (hi - 1) as f64;
        Self::new(n_max, (2..=hi).map(|k| (k, 1.0 / n)).collect())
    }

    pub fn point_mass(n_max: u32, position: u32) -> Result<Self> {
        Self::new(n_max, [(position, 1.0)].into_iter().collect())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: TwistDistribution = serde_json::from_str(text)?;
        Self::new(raw.n_max, raw.probs)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    /// Draws one position using `rng`.
    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = 2;
        for (&pos, &p) in &self.probs {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            last = pos;
            if u < acc {
                return pos;
            }
        }
        last
    }
}

/// One draw of the twist position, fully determined by `seed`.
pub fn sample_position(dist: &TwistDistribution, seed: u64) -> u32 {
    dist.sample_with(&mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Debug, Deserialize)]
struct LabelRow {
    story_id: String,
    twist_position: u32,
    story_length: u32,
}

/// Histogram of annotated twist positions from a
/// `story_id,twist_position,story_length` CSV with header.
pub fn build_distribution_from_labels(csv_text: &str) -> Result<TwistDistribution> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    let mut n_max: Option<u32> = None;
    let mut total = 0u64;
    for (i, row) in reader.deserialize::<LabelRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let expected = *n_max.get_or_insert(row.story_length);
        if row.story_length != expected {
            return Err(Error::InconsistentLength {
                expected,
                found: row.story_length,
                line,
            });
        }
        if !(2..=row.story_length).contains(&row.twist_position) {
            return Err(Error::Support {
                position: row.twist_position,
                n_max: row.story_length,
            });
        }
        log::trace!("label {} -> {}", row.story_id, row.twist_position);
        *counts.entry(row.twist_position).or_default() += 1;
        total += 1;
    }
    let n_max = n_max.ok_or(Error::EmptyLabels)?;
    TwistDistribution::new(
        n_max,
        counts
            .into_iter()
            .map(|(k, c)| (k, c as f64 / total as f64))
            .collect(),
    )
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<TwistDistribution> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    build_distribution_from_labels(&text)
}
