//! Affect-controlled story decoding.
//!
//! A story starts from a prompt sentence. One later sentence, chosen by
//! sampling a twist-position distribution, is decoded with a beam whose width
//! a LinUCB contextual bandit picks token by token; its finished candidates
//! are reranked by arousal and valence contrast with the story so far. All
//! other sentences use a plain fixed-width beam. Language models plug in
//! through [`lm::LanguageModel`], either the built-in n-gram model or a
//! remote JSON-over-HTTP backend.

pub mod bandit;
pub mod config;
pub mod decoder;
pub mod error;
pub mod lexicon;
pub mod lm;
pub mod pipeline;
pub mod reranker;
pub mod tokens;
pub mod twist;

pub use config::{Assets, Config};
pub use error::{Error, Result};
