use serde::{Deserialize, Serialize};

use crate::util::mix_seed;

/// Systematic character confusions of the kind OCR engines make.
pub const CONFUSION_TABLE: &[(&str, &str)] = &[
    ("rn", "m"),
    ("m", "rn"),
    ("l", "1"),
    ("o", "0"),
    ("i", "l"),
    ("s", "5"),
    ("b", "6"),
    ("g", "9"),
    ("e", "c"),
];

/// Deterministic OCR corruption. Whether a confusable substring is replaced
/// depends only on (seed, word, position), so every occurrence of a word is
/// misread the same way.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// Probability that a given confusable position inside a word is misread.
    pub rate: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { rate: 0.15, seed: 0x0C4 }
    }
}

impl NoiseSpec {
    pub fn disabled() -> Self {
        Self { rate: 0.0, seed: 0 }
    }

    fn word_hash(&self, word: &str) -> u64 {
        word.bytes().fold(mix_seed(self.seed, 0xF00D), |h, b| mix_seed(h, b as u64))
    }

    pub fn corrupt_word(&self, word: &str) -> String {
        if self.rate <= 0.0 {
            return word.to_string();
        }
        let base = self.word_hash(word);
        let mut out = String::with_capacity(word.len() + 2);
        let mut rest = word;
        let mut pos = 0u64;
        'outer: while !rest.is_empty() {
            for (from, to) in CONFUSION_TABLE {
                if rest.starts_with(from) {
                    let u = (mix_seed(base, pos) >> 11) as f64 / (1u64 << 53) as f64;
                    if u < self.rate {
                        out.push_str(to);
                        rest = &rest[from.len()..];
                        pos += 1;
                        continue 'outer;
                    }
                }
            }
            let c = rest.chars().next().expect("non-empty");
            out.push(c);
            rest = &rest[c.len_utf8()..];
            pos += 1;
        }
        out
    }

    /// Corrupts each whitespace-separated word; separators are normalized to
    /// single spaces.
    pub fn corrupt_text(&self, text: &str) -> String {
        text.split_whitespace()
            .map(|w| self.corrupt_word(w))
            .collect::<Vec<_>>()
            .join(" ")
    }
}
