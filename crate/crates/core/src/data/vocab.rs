use std::collections::HashMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::dialogue::Dialogue;
use crate::error::{Error, IoContext, Result};

pub type TokenId = u32;

pub const PAD: TokenId = 0;
pub const BOS: TokenId = 1;
pub const EOS: TokenId = 2;
pub const UNK: TokenId = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Lowercases, splits on whitespace and detaches every non-alphanumeric
/// character as its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_whitespace() {
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
        } else if c.is_alphanumeric() {
            word.push(c);
        } else {
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
            tokens.push(c.to_string());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    tokens.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" ")
}

/// Canonical text form: lowercase with punctuation separated by spaces.
pub fn normalize(text: &str) -> String {
    detokenize(&tokenize(text))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < RESERVED.len() || tokens[..RESERVED.len()] != RESERVED {
            return Err(Error::Data("vocabulary must start with the reserved tokens".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as TokenId).is_some() {
                return Err(Error::Data(format!("duplicate vocabulary entry {t:?}")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Id of `token`, or [`UNK`] when it is not in the vocabulary.
    pub fn id(&self, token: &str) -> TokenId {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<TokenId> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    /// Text for `ids`, skipping pad/bos/eos.
    pub fn decode(&self, ids: &[TokenId]) -> String {
        let words: Vec<&str> = ids
            .iter()
            .filter(|&&id| !matches!(id, PAD | BOS | EOS))
            .map(|&id| self.token(id).unwrap_or(RESERVED[UNK as usize]))
            .collect();
        detokenize(&words)
    }

    /// One token per line in id order.
    pub fn to_file_string(&self) -> String {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_tokens(text.lines().map(str::to_string).collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_file_string()).at(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path).at(path)?)
    }

    /// SHA-256 of the file representation, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_file_string().as_bytes()))
    }
}

/// Builds a vocabulary from every turn of `dialogues`, keeping tokens seen
/// at least `min_freq` times, ordered by frequency then lexicographically.
pub fn build_vocab(dialogues: &[Dialogue], min_freq: usize) -> Result<Vocabulary> {
    if min_freq == 0 {
        return Err(Error::Validation("min_freq must be at least 1".into()));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for turn in dialogues.iter().flat_map(|d| &d.turns) {
        for t in &turn.tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::Data("cannot build a vocabulary from an empty corpus".into()));
    }
    let mut kept: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(t, c)| c >= min_freq && !RESERVED.contains(&t))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let tokens = RESERVED
        .iter()
        .map(|s| s.to_string())
        .chain(kept.into_iter().map(|(t, _)| t.to_string()))
        .collect();
    Vocabulary::from_tokens(tokens)
}
