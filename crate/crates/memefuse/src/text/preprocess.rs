//! Raw caption text to clean token lists.
//!
//! Stages: lowercase, split into alphanumeric runs (which drops punctuation
//! tokens outright), remove stopwords, stem, remove stopwords again. The
//! second removal catches words that only become stopwords after stemming
//! ("cans" -> "can"), which keeps the whole pipeline a fixed point on its own
//! output.

use std::collections::HashSet;

use crate::text::porter::stem;

/// English stopwords, one per line. Covers determiners, prepositions,
/// pronouns, auxiliaries, and common conjunctions.
const STOPWORDS: &str = include_str!("stopwords.txt");

#[derive(Debug, Clone)]
pub struct PreprocConfig {
    stopwords: HashSet<String>,
}

impl Default for PreprocConfig {
    fn default() -> Self {
        PreprocConfig {
            stopwords: STOPWORDS.lines().map(str::to_string).collect(),
        }
    }
}

impl PreprocConfig {
    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn stopword_count(&self) -> usize {
        self.stopwords.len()
    }
}

pub fn preprocess_text(raw: &str, config: &PreprocConfig) -> Vec<String> {
    let lowered = raw.to_lowercase();
    lowered
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .filter(|t| !config.is_stopword(t))
        .map(stem)
        .filter(|t| !config.is_stopword(t))
        .collect()
}
