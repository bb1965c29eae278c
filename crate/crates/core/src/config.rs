//! JSON run configuration with sections `decode`, `payoff`, `bandit`,
//! `lexicon`, `twist` and `provider`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bandit::{
    ConstantTrigger, LinUcbState, PayoffConfig, RemoteTrigger, TableTrigger, TriggerHandle,
    CONTEXT_DIM,
};
use crate::decoder::DecodeConfig;
use crate::error::{Error, Result};
use crate::lexicon::AffectLexicon;
use crate::lm::{LanguageModel, NgramModel, ProviderHandle, RemoteProvider};
use crate::twist::{load_labels, TwistDistribution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeSection {
    pub beam_sizes: Vec<usize>,
    pub fixed_beam: usize,
    pub max_sentence_tokens: usize,
    pub terminators: Vec<String>,
    pub lambda: f64,
    pub ppl_cap: f64,
    /// Story length in sentences, prompt included.
    pub n_target: u32,
}

impl Default for DecodeSection {
    fn default() -> Self {
        let d = DecodeConfig::default();
        DecodeSection {
            beam_sizes: d.beam_sizes,
            fixed_beam: d.fixed_beam,
            max_sentence_tokens: d.max_sentence_tokens,
            terminators: d.terminators,
            lambda: d.lambda,
            ppl_cap: d.ppl_cap,
            n_target: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TriggerConfig {
    Constant { p: f64 },
    Table { path: PathBuf },
    Remote { endpoint: String },
}

impl Default for TriggerConfig {
    fn default() -> Self {
        TriggerConfig::Constant { p: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BanditSection {
    pub ucb_alpha: f64,
    /// Trained state; a fresh state is used when absent.
    pub state: Option<PathBuf>,
    pub trigger: TriggerConfig,
}

impl Default for BanditSection {
    fn default() -> Self {
        BanditSection {
            ucb_alpha: 1.0,
            state: None,
            trigger: TriggerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LexiconSection {
    pub path: Option<PathBuf>,
    pub strict: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwistSection {
    /// Histogram file `{n_max, probs}`.
    pub distribution: Option<PathBuf>,
    /// Annotation CSV; used when no histogram is given.
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProviderConfig {
    BuiltinNgram { model: PathBuf },
    Remote { endpoint: String },
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig::BuiltinNgram {
            model: PathBuf::from("model.json"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub decode: DecodeSection,
    pub payoff: PayoffConfig,
    pub bandit: BanditSection,
    pub lexicon: LexiconSection,
    pub twist: TwistSection,
    pub provider: ProviderConfig,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Reads a config file; relative asset paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.bandit.state.as_mut().map(fix);
        self.lexicon.path.as_mut().map(fix);
        self.twist.distribution.as_mut().map(fix);
        self.twist.labels.as_mut().map(fix);
        if let TriggerConfig::Table { path } = &mut self.bandit.trigger {
            fix(path);
        }
        if let ProviderConfig::BuiltinNgram { model } = &mut self.provider {
            fix(model);
        }
    }

    /// Applies a `section.key=value` override. Values parse as JSON and fall
    /// back to plain strings.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!("override {assignment:?} is not key=value"))
        })?;
        let value: serde_json::Value = serde_json::from_str(raw)
            .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        let mut tree = serde_json::to_value(&*self)?;
        let mut node = &mut tree;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let obj = node
                .as_object_mut()
                .ok_or_else(|| Error::InvalidConfig(format!("{key}: {part} is not a section")))?;
            if i + 1 == parts.len() {
                obj.insert(part.to_string(), value.clone());
                break;
            }
            node = obj
                .get_mut(*part)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown config key {key}")))?;
        }
        let updated: Config = serde_json::from_value(tree)
            .map_err(|e| Error::InvalidConfig(format!("override {assignment}: {e}")))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.decode_config().validate()?;
        if self.decode.n_target < 2 {
            return Err(Error::InvalidConfig("n_target must be >= 2".into()));
        }
        if !(self.bandit.ucb_alpha.is_finite() && self.bandit.ucb_alpha >= 0.0) {
            return Err(Error::InvalidConfig(
                "ucb_alpha must be finite and >= 0".into(),
            ));
        }
        if let TriggerConfig::Constant { p } = self.bandit.trigger {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!(
                    "constant trigger {p} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    pub fn decode_config(&self) -> DecodeConfig {
        DecodeConfig {
            beam_sizes: self.decode.beam_sizes.clone(),
            fixed_beam: self.decode.fixed_beam,
            max_sentence_tokens: self.decode.max_sentence_tokens,
            terminators: self.decode.terminators.clone(),
            lambda: self.decode.lambda,
            payoff: self.payoff,
            ppl_cap: self.decode.ppl_cap,
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

/// Everything a run needs, loaded once from a [`Config`].
pub struct Assets {
    pub provider: Arc<dyn LanguageModel>,
    pub lexicon: AffectLexicon,
    pub trigger: TriggerHandle,
    pub twist: TwistDistribution,
    /// Where the twist distribution came from; `synthetic-uniform` for the default.
    pub twist_source: String,
    pub bandit: LinUcbState,
}

impl Assets {
    pub fn load(cfg: &Config) -> Result<Self> {
        cfg.validate()?;
        let provider: Arc<dyn LanguageModel> = match &cfg.provider {
            ProviderConfig::BuiltinNgram { model } => Arc::new(ProviderHandle::BuiltinNgram(
                Arc::new(NgramModel::load(model)?),
            )),
            ProviderConfig::Remote { endpoint } => Arc::new(ProviderHandle::Remote(
                RemoteProvider::new(endpoint.clone()),
            )),
        };
        let lexicon = match &cfg.lexicon.path {
            Some(p) => AffectLexicon::load(p, cfg.lexicon.strict)?,
            None => {
                log::warn!("no lexicon configured; every affect score will be 0");
                AffectLexicon::default()
            }
        };
        let trigger: TriggerHandle = match &cfg.bandit.trigger {
            TriggerConfig::Constant { p } => Arc::new(ConstantTrigger(*p)),
            TriggerConfig::Table { path } => Arc::new(TableTrigger::load(path)?),
            TriggerConfig::Remote { endpoint } => Arc::new(RemoteTrigger::new(endpoint)),
        };
        let (twist, twist_source) = match (&cfg.twist.distribution, &cfg.twist.labels) {
            (Some(p), _) => (
                TwistDistribution::load(p)?,
                format!("histogram:{}", p.display()),
            ),
            (None, Some(p)) => (load_labels(p)?, format!("labels:{}", p.display())),
            (None, None) => (
                TwistDistribution::uniform_default(cfg.decode.n_target)?,
                "synthetic-uniform".to_string(),
            ),
        };
        let bandit = match &cfg.bandit.state {
            Some(p) => {
                let state = LinUcbState::load(p)?;
                if state.beam_sizes() != cfg.decode.beam_sizes || state.dim() != CONTEXT_DIM {
                    return Err(Error::InvalidConfig(format!(
                        "bandit state arms {:?} (d={}) do not match configured beam sizes {:?}",
                        state.beam_sizes(),
                        state.dim(),
                        cfg.decode.beam_sizes
                    )));
                }
                state
            }
            None => LinUcbState::new(&cfg.decode.beam_sizes, CONTEXT_DIM, cfg.bandit.ucb_alpha)?,
        };
        Ok(Assets {
            provider,
            lexicon,
            trigger,
            twist,
            twist_source,
            bandit,
        })
    }
}
