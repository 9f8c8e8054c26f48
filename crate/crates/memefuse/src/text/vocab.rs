//! Token ids. Id 0 is PAD, id 1 is OOV, corpus tokens start at 2 in
//! first-seen order.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD_ID: usize = 0;
pub const OOV_ID: usize = 1;

#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Total id count, reserved ids included.
    pub fn len(&self) -> usize {
        self.tokens.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(OOV_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// The corpus token behind an id; reserved and out-of-range ids have none.
    pub fn token(&self, id: usize) -> Option<&str> {
        id.checked_sub(2).and_then(|i| self.tokens.get(i)).map(String::as_str)
    }

    /// Corpus tokens in id order (id 2 first).
    pub fn corpus_tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    fn push(&mut self, token: &str) {
        if !self.index.contains_key(token) {
            self.index.insert(token.to_string(), self.tokens.len() + 2);
            self.tokens.push(token.to_string());
        }
    }

    /// One corpus token per line, line order = id order.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut vocab = Vocabulary::default();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "empty vocabulary line".to_string(),
                });
            }
            if vocab.contains(line) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("duplicate vocabulary token {line:?}"),
                });
            }
            vocab.push(line);
        }
        Ok(vocab)
    }
}

pub fn build_vocab(corpus: &[Vec<String>], min_count: usize) -> Result<Vocabulary> {
    if min_count < 1 {
        return Err(Error::config("build_vocab: min_count must be at least 1"));
    }
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for doc in corpus {
        for token in doc {
            *freq.entry(token).or_insert(0) += 1;
        }
    }
    let mut vocab = Vocabulary::default();
    for doc in corpus {
        for token in doc {
            if freq[token.as_str()] >= min_count {
                vocab.push(token);
            }
        }
    }
    Ok(vocab)
}

/// Maps the first `min(len, L)` tokens to ids (unknown tokens to OOV) and
/// fills the rest with PAD.
pub fn encode_and_pad(tokens: &[String], vocab: &Vocabulary, pad_length: usize) -> Result<Vec<usize>> {
    if pad_length < 1 {
        return Err(Error::config("encode_and_pad: pad length must be at least 1"));
    }
    let mut ids = Vec::with_capacity(pad_length);
    for token in tokens.iter().take(pad_length) {
        ids.push(vocab.id(token));
    }
    ids.resize(pad_length, PAD_ID);
    Ok(ids)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn ids_follow_first_seen_order() {
        let corpus = vec![toks(&["x", "y"])];
        let v = build_vocab(&corpus, 1).unwrap();
        assert_eq!(v.id("x"), 2);
        assert_eq!(v.id("y"), 3);
        assert_eq!(v.len(), 4);
        assert_eq!(v.token(2), Some("x"));
        assert_eq!(v.token(0), None);
        assert_eq!(v.token(99), None);
    }

    #[test]
    fn min_count_filters_rare_tokens() {
        // Frequencies by hand: a appears twice, b once.
        let corpus = vec![toks(&["a", "b"]), toks(&["a"])];
        let v = build_vocab(&corpus, 2).unwrap();
        assert_eq!(v.id("a"), 2);
        assert_eq!(v.id("b"), OOV_ID);
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn empty_corpus_keeps_reserved_ids() {
        let v = build_vocab(&[], 5).unwrap();
        assert_eq!(v.len(), 2);
        assert!(v.is_empty());
    }

    #[test]
    fn zero_min_count_is_rejected() {
        assert!(build_vocab(&[], 0).is_err());
    }

    #[test]
    fn encode_pads_and_truncates() {
        let v = build_vocab(&[toks(&["cat", "sat"])], 1).unwrap();
        assert_eq!(encode_and_pad(&toks(&["cat", "sat"]), &v, 4).unwrap(), vec![2, 3, 0, 0]);
        assert_eq!(encode_and_pad(&toks(&["zebra"]), &v, 2).unwrap(), vec![1, 0]);
        let ten = toks(&["cat"; 10]);
        assert_eq!(encode_and_pad(&ten, &v, 4).unwrap(), vec![2, 2, 2, 2]);
        assert!(encode_and_pad(&ten, &v, 0).is_err());
    }

    #[test]
    fn encode_length_is_always_l() {
        let v = build_vocab(&[toks(&["a"])], 1).unwrap();
        for n in 0..10 {
            let tokens = toks(&vec!["a"; n]);
            assert_eq!(encode_and_pad(&tokens, &v, 5).unwrap().len(), 5);
        }
    }

    #[test]
    fn save_load_roundtrip_preserves_ids() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        let v = build_vocab(&[toks(&["cat", "sat", "mat"])], 1).unwrap();
        v.save(&path).unwrap();
        let loaded = Vocabulary::load(&path).unwrap();
        assert_eq!(loaded.len(), v.len());
        for t in ["cat", "sat", "mat"] {
            assert_eq!(loaded.id(t), v.id(t));
        }
    }
}
