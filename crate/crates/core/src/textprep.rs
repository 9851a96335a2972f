//! Text normalization shared by every channel: tokenization, stopword
//! removal and n-gram expansion.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::Fingerprint;

pub const MAX_NGRAM: usize = 3;

#[derive(Debug, Error)]
pub enum PrepError {
    #[error("ngram_max must be in 1..={MAX_NGRAM}, got {0}")]
    NgramOutOfRange(usize),
    #[error("min_token_len must be at least 1")]
    ZeroMinLen,
    #[error("reading stopword list {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Tokenizer settings. Stopwords are stored sorted so that the config hash
/// is stable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepConfig {
    pub ngram_max: usize,
    pub stopwords: BTreeSet<String>,
    pub min_token_len: usize,
}

impl Default for PrepConfig {
    fn default() -> Self {
        Self {
            ngram_max: 1,
            stopwords: BTreeSet::new(),
            min_token_len: 1,
        }
    }
}

impl PrepConfig {
    pub fn validate(&self) -> Result<(), PrepError> {
        if !(1..=MAX_NGRAM).contains(&self.ngram_max) {
            return Err(PrepError::NgramOutOfRange(self.ngram_max));
        }
        if self.min_token_len == 0 {
            return Err(PrepError::ZeroMinLen);
        }
        Ok(())
    }

    pub fn with_stopwords<I, S>(mut self, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.stopwords = words
            .into_iter()
            .map(|w| w.as_ref().to_lowercase())
            .collect();
        self
    }

    /// Digest of the active stopword list alone.
    pub fn stopword_hash(&self) -> String {
        let mut fp = Fingerprint::new();
        for w in &self.stopwords {
            fp.update(w);
        }
        fp.finish()
    }

    pub fn hash(&self) -> String {
        let mut fp = Fingerprint::new();
        fp.update(self.ngram_max.to_le_bytes())
            .update(self.min_token_len.to_le_bytes())
            .update(self.stopword_hash());
        fp.finish()
    }
}

/// Reads a stopword file: one token per line, blank lines and `#` comments
/// ignored.
pub fn load_stopwords(path: &Path) -> Result<BTreeSet<String>, PrepError> {
    let text = fs::read_to_string(path).map_err(|source| PrepError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect())
}

/// A small English sample list; the default configuration uses none.
pub const SAMPLE_STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "from", "has", "have", "in",
    "is", "it", "its", "of", "on", "or", "that", "the", "this", "to", "was", "we", "were",
    "when", "with",
];

fn is_token_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Lowercased tokens: maximal runs of letter/digit/underscore characters,
/// minus short tokens and stopwords.
pub fn tokenize(text: &str, config: &PrepConfig) -> Vec<String> {
    text.split(|c: char| !is_token_char(c))
        .filter(|t| !t.is_empty())
        .filter_map(|raw| {
            // Lowercasing can expand a character into several (e.g. 'İ'),
            // some of which may not be token characters.
            let lower: String = raw.to_lowercase().chars().filter(|&c| is_token_char(c)).collect();
            if lower.chars().count() < config.min_token_len || config.stopwords.contains(&lower) {
                None
            } else {
                Some(lower)
            }
        })
        .collect()
}

/// All contiguous k-grams for k = 1..=n_max, ordered by start position and
/// then by k.
pub fn ngrams(tokens: &[String], n_max: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(ngram_count(tokens.len(), n_max));
    for start in 0..tokens.len() {
        for k in 1..=n_max {
            if start + k > tokens.len() {
                break;
            }
            if k == 1 {
                out.push(tokens[start].clone());
            } else {
                out.push(tokens[start..start + k].join(" "));
            }
        }
    }
    out
}

pub fn ngram_count(len: usize, n_max: usize) -> usize {
    (1..=n_max).map(|k| (len + 1).saturating_sub(k)).sum()
}

/// Tokenize then expand to the configured n-gram terms.
pub fn terms(text: &str, config: &PrepConfig) -> Vec<String> {
    let tokens = tokenize(text, config);
    if config.ngram_max == 1 {
        tokens
    } else {
        ngrams(&tokens, config.ngram_max)
    }
}
