//! Reserved vocabulary symbols and whitespace tokenization.

use std::cmp::Ordering;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

/// Rank of a reserved symbol, `None` for ordinary tokens.
pub fn reserved_rank(token: &str) -> Option<u8> {
    match token {
        BOS => Some(0),
        EOS => Some(1),
        UNK => Some(2),
        _ => None,
    }
}

pub fn is_reserved(token: &str) -> bool {
    reserved_rank(token).is_some()
}

/// Total order used for every tie-break over tokens: reserved symbols first
/// (BOS, EOS, UNK), then plain lexicographic byte order.
pub fn token_order(a: &str, b: &str) -> Ordering {
    match (reserved_rank(a), reserved_rank(b)) {
        (Some(x), Some(y)) => x.cmp(&y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => a.cmp(b),
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

/// Joins tokens for display, dropping reserved symbols.
pub fn render(tokens: &[String]) -> String {
    tokens
        .iter()
        .filter(|t| !is_reserved(t))
        .map(String::as_str)
        .collect::<Vec<_>>()
        .join(" ")
}
