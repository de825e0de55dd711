//! Word-level tokenization shared by the models and the metrics.
//!
//! Text is lowercased and split into maximal alphanumeric runs; every other
//! non-whitespace character becomes a token of its own. The same rule feeds
//! the vocabulary, BLEU/METEOR n-grams and content-token extraction, so all
//! of them agree on what a "word" is.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Splits `text` into lowercase word and punctuation tokens.
pub fn words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
            continue;
        }
        if !current.is_empty() {
            out.push(std::mem::take(&mut current));
        }
        if !ch.is_whitespace() {
            out.push(ch.to_lowercase().collect());
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

const STOPWORDS_EN_V1: &str = include_str!("../data/stopwords-en-v1.txt");
const SYNTH_VOCAB: &str = include_str!("../data/synth-vocab.txt");

fn data_lines(raw: &str) -> impl Iterator<Item = &str> {
    raw.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

/// The word list bundled for synthetic corpora.
pub fn default_synth_vocab() -> Vec<String> {
    data_lines(SYNTH_VOCAB).map(str::to_owned).collect()
}

/// A set of lowercase words ignored when extracting content tokens.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StopWords {
    version: String,
    words: BTreeSet<String>,
}

impl StopWords {
    /// The bundled English list (`stopwords-en-v1`).
    pub fn english() -> Self {
        Self {
            version: "en-v1".to_owned(),
            words: data_lines(STOPWORDS_EN_V1).map(str::to_owned).collect(),
        }
    }

    pub fn from_words<I, S>(version: &str, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            version: version.to_owned(),
            words: words.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
        }
    }

    /// Reads a stopword file in the same format as the bundled list.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let version = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(Self::from_words(&version, data_lines(&raw)))
    }

    pub fn version(&self) -> &str {
        &self.version
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
}

/// Reserved vocabulary entries. Their ids are fixed and precede all words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Special {
    Pad,
    Unk,
    Cls,
    Sep,
    Bos,
    Eos,
    Counter,
    Weak,
}

impl Special {
    pub const ALL: [Special; 8] = [
        Special::Pad,
        Special::Unk,
        Special::Cls,
        Special::Sep,
        Special::Bos,
        Special::Eos,
        Special::Counter,
        Special::Weak,
    ];

    pub fn id(self) -> u32 {
        self as u32
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Special::Pad => "[pad]",
            Special::Unk => "[unk]",
            Special::Cls => "[cls]",
            Special::Sep => "[sep]",
            Special::Bos => "[bos]",
            Special::Eos => "[eos]",
            Special::Counter => "[counter]",
            Special::Weak => "[weak]",
        }
    }
}

/// Closed word-level vocabulary. Unknown words map to `[unk]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    /// Builds a vocabulary from raw texts. Words are ordered by descending
    /// frequency, then alphabetically, after the special tokens.
    pub fn build<'a, I>(texts: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for text in texts {
            for w in words(text) {
                *counts.entry(w).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let tokens = Special::ALL
            .iter()
            .map(|s| s.symbol().to_owned())
            .chain(ranked.into_iter().map(|(w, _)| w))
            .collect();
        Self::from_tokens(tokens).expect("special symbols never collide with words")
    }

    fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        for (i, s) in Special::ALL.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(s.symbol()) {
                return Err(Error::InvalidInput(format!(
                    "vocabulary must start with the special token {} at id {i}",
                    s.symbol()
                )));
            }
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::InvalidInput(format!("duplicate vocabulary entry {t:?}")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, word: &str) -> u32 {
        self.index.get(word).copied().unwrap_or(Special::Unk.id())
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn is_special(id: u32) -> bool {
        (id as usize) < Special::ALL.len()
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        words(text).iter().map(|w| self.id(w)).collect()
    }

    /// Joins word tokens with single spaces, dropping special tokens.
    pub fn decode(&self, ids: &[u32]) -> String {
        ids.iter()
            .filter(|&&id| !Self::is_special(id))
            .filter_map(|&id| self.token(id))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Hex SHA-256 over the newline-joined token list.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for t in &self.tokens {
            hasher.update(t.as_bytes());
            hasher.update(b"\n");
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

impl TryFrom<Vec<String>> for Vocab {
    type Error = Error;

    fn try_from(tokens: Vec<String>) -> Result<Self> {
        Self::from_tokens(tokens)
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}
