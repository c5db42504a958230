//! Token vocabulary and fixed-length id encoding.

use std::collections::HashMap;

/// Id of the padding token (embedding row pinned to zero).
pub const PAD_ID: usize = 0;
/// Id assigned to out-of-vocabulary tokens.
pub const UNK_ID: usize = 1;

/// Whitespace tokenization.
pub fn tokenize(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace()
}

/// Token table built from training text only. Ids 0 and 1 are reserved for
/// padding and unknowns; real tokens start at 2, ordered by descending
/// frequency with ties broken lexicographically.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Count tokens across `texts` and keep those occurring at least
    /// `min_count` times.
    pub fn build<'a>(texts: impl Iterator<Item = &'a str>, min_count: usize) -> Vocab {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        let mut owned: Vec<String> = Vec::new();
        // Two passes over owned strings would borrow-fight; count on slices
        // of a collected text list instead.
        let all: Vec<&str> = texts.collect();
        for text in &all {
            for tok in tokenize(text) {
                *counts.entry(tok).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        for (tok, _) in kept {
            owned.push(tok.to_string());
        }
        Vocab::from_tokens(owned)
    }

    /// Rebuild from an ordered token list (as stored in a checkpoint).
    pub fn from_tokens(tokens: Vec<String>) -> Vocab {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i + 2))
            .collect();
        Vocab { tokens, index }
    }

    /// Id for a token; unknown tokens map to [`UNK_ID`].
    pub fn token_id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    /// Total id count including the two reserved ids.
    pub fn len(&self) -> usize {
        self.tokens.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Ordered token list (id = position + 2), for serialization.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Encode text to exactly `len` token ids: unknowns map to [`UNK_ID`],
/// sequences longer than `len` are truncated at the end, shorter ones are
/// left-padded with [`PAD_ID`].
pub fn encode_text(text: &str, vocab: &Vocab, len: usize) -> Vec<usize> {
    let ids: Vec<usize> = tokenize(text).take(len).map(|t| vocab.token_id(t)).collect();
    let mut out = vec![PAD_ID; len];
    let start = len - ids.len();
    out[start..].copy_from_slice(&ids);
    out
}
