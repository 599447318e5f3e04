use std::collections::HashMap;

use thiserror::Error;

pub const BOS: usize = 0;
pub const EOS: usize = 1;
pub const UNK: usize = 2;
const RESERVED: [&str; 3] = ["<bos>", "<eos>", "<unk>"];

#[derive(Debug, Error, PartialEq)]
pub enum VocabError {
    #[error("vocabulary must start with the reserved tokens <bos>, <eos>, <unk>")]
    MissingReserved,
    #[error("token '{0}' listed twice")]
    Duplicate(String),
}

/// Token ↔ index bijection with BOS/EOS/UNK at indices 0, 1, 2.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Keeps the `max_size − 3` most frequent tokens (ties broken alphabetically).
    pub fn build<'a, I, S>(sequences: I, max_size: usize) -> Self
    where
        I: IntoIterator<Item = S>,
        S: IntoIterator<Item = &'a String>,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for seq in sequences {
            for tok in seq {
                if !RESERVED.contains(&tok.as_str()) {
                    *counts.entry(tok.as_str()).or_default() += 1;
                }
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let keep = max_size.saturating_sub(RESERVED.len());
        Self::from_tokens_unchecked(ranked.into_iter().take(keep).map(|(t, _)| t.to_string()))
    }

    /// Reserved tokens followed by `extra` (duplicates of reserved tokens skipped).
    pub fn with_tokens(extra: impl IntoIterator<Item = String>) -> Self {
        Self::from_tokens_unchecked(extra.into_iter().filter(|t| !RESERVED.contains(&t.as_str())))
    }

    fn from_tokens_unchecked(extra: impl Iterator<Item = String>) -> Self {
        let mut vocab = Self {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for t in RESERVED.iter().map(|s| s.to_string()).chain(extra) {
            if !vocab.index.contains_key(&t) {
                vocab.index.insert(t.clone(), vocab.tokens.len());
                vocab.tokens.push(t);
            }
        }
        vocab
    }

    /// Parses one token per line, as written by [`Vocabulary::to_text`].
    pub fn from_text(text: &str) -> Result<Self, VocabError> {
        let tokens: Vec<&str> = text.lines().collect();
        if tokens.len() < 3 || tokens[..3] != RESERVED {
            return Err(VocabError::MissingReserved);
        }
        let mut vocab = Self {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for t in tokens {
            if vocab.index.insert(t.to_string(), vocab.tokens.len()).is_some() {
                return Err(VocabError::Duplicate(t.to_string()));
            }
            vocab.tokens.push(t.to_string());
        }
        Ok(vocab)
    }

    pub fn to_text(&self) -> String {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Index of `token`, or [`UNK`].
    pub fn encode(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK)
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn is_reserved(index: usize) -> bool {
        index < RESERVED.len()
    }
}
