//! Pluggable token counters.
//!
//! The synthesis budget only needs a characters-per-token ratio and a way to
//! measure (and optionally cut) output length in tokens, so any tokenizer that
//! can count and locate token boundaries will do.

use serde::{Deserialize, Serialize};
use std::str::FromStr;

pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> usize;

    /// Length in chars of the shortest prefix of `text` holding `n` tokens,
    /// or `None` when `text` has fewer than `n` tokens.
    fn prefix_chars(&self, text: &str, n: usize) -> Option<usize>;
}

/// Whitespace-delimited words.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokenizer;

impl TokenCounter for WhitespaceTokenizer {
    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }

    fn prefix_chars(&self, text: &str, n: usize) -> Option<usize> {
        if n == 0 {
            return Some(0);
        }
        let mut seen = 0;
        let mut in_token = false;
        for (pos, c) in text.chars().enumerate() {
            if c.is_whitespace() {
                if in_token {
                    seen += 1;
                    if seen == n {
                        return Some(pos);
                    }
                }
                in_token = false;
            } else {
                in_token = true;
            }
        }
        if in_token && seen + 1 == n {
            return Some(text.chars().count());
        }
        None
    }
}

/// Fixed four characters per token, a rough stand-in for subword tokenizers.
#[derive(Debug, Clone, Copy, Default)]
pub struct Char4Tokenizer;

impl TokenCounter for Char4Tokenizer {
    fn count(&self, text: &str) -> usize {
        text.chars().count().div_ceil(4)
    }

    fn prefix_chars(&self, text: &str, n: usize) -> Option<usize> {
        let len = text.chars().count();
        if n > len.div_ceil(4) {
            return None;
        }
        Some((n * 4).min(len))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerKind {
    #[default]
    Whitespace,
    Char4,
}

impl TokenizerKind {
    pub fn counter(self) -> &'static dyn TokenCounter {
        match self {
            TokenizerKind::Whitespace => &WhitespaceTokenizer,
            TokenizerKind::Char4 => &Char4Tokenizer,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TokenizerKind::Whitespace => "whitespace",
            TokenizerKind::Char4 => "char4",
        }
    }
}

impl FromStr for TokenizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "whitespace" => Ok(TokenizerKind::Whitespace),
            "char4" => Ok(TokenizerKind::Char4),
            other => Err(format!("unknown tokenizer '{other}' (expected whitespace or char4)")),
        }
    }
}
