//! Tokenization and stop-word handling shared by standardization and the
//! text-based ranking features.

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// Lowercases, replaces punctuation with spaces and collapses whitespace.
///
/// `+` and `#` are kept so that "C++" and "C#" stay distinguishable.
pub fn normalize(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_space = false;
    for ch in raw.chars() {
        if ch.is_alphanumeric() || ch == '+' || ch == '#' {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.extend(ch.to_lowercase());
        } else {
            pending_space = true;
        }
    }
    out
}

pub fn tokens(raw: &str) -> Vec<String> {
    normalize(raw).split(' ').filter(|t| !t.is_empty()).map(str::to_owned).collect()
}

#[derive(Debug, Clone, Default)]
pub struct StopWords {
    words: HashSet<String>,
}

impl StopWords {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_STOPWORDS)
    }

    /// One word per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(normalize)
            .filter(|w| !w.is_empty())
            .collect();
        StopWords { words }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Normalized tokens of `raw` with stop-words removed, in order.
    pub fn content_tokens(&self, raw: &str) -> Vec<String> {
        tokens(raw).into_iter().filter(|t| !self.contains(t)).collect()
    }

    /// Sorted, de-duplicated content tokens.
    pub fn word_set(&self, raw: &str) -> Vec<String> {
        let mut words = self.content_tokens(raw);
        words.sort_unstable();
        words.dedup();
        words
    }
}
