//! Description normalisation: whitespace tokenization, punctuation
//! stripping, stopword placeholders and proper-name tags.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords_es.txt");
const DEFAULT_NAMES: &str = include_str!("../data/names_es.txt");

/// Stopword and proper-name lists. Entries are stored lowercase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GazetteerConfig {
    stopwords: HashSet<String>,
    names: HashSet<String>,
}

/// Content hashes of the two gazetteer lists, recorded in model bundles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GazetteerDigests {
    pub stopwords: String,
    pub names: String,
}

impl GazetteerConfig {
    pub fn new<S, N>(stopwords: S, names: N) -> Self
    where
        S: IntoIterator,
        S::Item: AsRef<str>,
        N: IntoIterator,
        N::Item: AsRef<str>,
    {
        let clean = |s: &str| {
            let s = s.trim().to_lowercase();
            (!s.is_empty()).then_some(s)
        };
        GazetteerConfig {
            stopwords: stopwords.into_iter().filter_map(|s| clean(s.as_ref())).collect(),
            names: names.into_iter().filter_map(|s| clean(s.as_ref())).collect(),
        }
    }

    /// Parses list files: one entry per line, `#` starts a comment line.
    pub fn from_lists(stopwords: &str, names: &str) -> Self {
        GazetteerConfig::new(list_entries(stopwords), list_entries(names))
    }

    pub fn from_files(stopwords: impl AsRef<Path>, names: impl AsRef<Path>) -> Result<Self> {
        let stopwords = std::fs::read_to_string(stopwords)?;
        let names = std::fs::read_to_string(names)?;
        Ok(GazetteerConfig::from_lists(&stopwords, &names))
    }

    pub fn is_stopword(&self, lowercase: &str) -> bool {
        self.stopwords.contains(lowercase)
    }

    pub fn is_name(&self, lowercase: &str) -> bool {
        self.names.contains(lowercase)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    pub fn stopwords(&self) -> impl Iterator<Item = &str> {
        self.stopwords.iter().map(String::as_str)
    }

    pub fn digests(&self) -> GazetteerDigests {
        GazetteerDigests {
            stopwords: set_digest(&self.stopwords),
            names: set_digest(&self.names),
        }
    }
}

impl Default for GazetteerConfig {
    fn default() -> Self {
        GazetteerConfig::from_lists(DEFAULT_STOPWORDS, DEFAULT_NAMES)
    }
}

fn list_entries(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

fn set_digest(set: &HashSet<String>) -> String {
    let mut entries: Vec<&str> = set.iter().map(String::as_str).collect();
    entries.sort_unstable();
    let mut hasher = Sha256::new();
    for e in entries {
        hasher.update(e.as_bytes());
        hasher.update(b"\n");
    }
    hex::encode(hasher.finalize())
}

/// Three lowercase letters derived from the SHA-256 of the lowercase name.
pub fn name_suffix(name: &str) -> String {
    let digest = Sha256::digest(name.to_lowercase().as_bytes());
    digest[..3].iter().map(|b| (b'a' + b % 26) as char).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Token {
    /// Surviving text. `stripped` is set when punctuation was removed from it.
    Content { text: String, stripped: bool },
    /// A removed stopword or a token made only of punctuation.
    Placeholder,
    /// A proper name, identified by its three-letter suffix.
    NameTag(String),
}

impl Token {
    pub fn content(&self) -> Option<&str> {
        match self {
            Token::Content { text, .. } => Some(text),
            _ => None,
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Content { text, stripped: false } => f.write_str(text),
            Token::Content { text, stripped: true } => write!(f, "#{text}"),
            Token::Placeholder => f.write_str("#"),
            Token::NameTag(suffix) => write!(f, "#PN{suffix}#"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PreprocessedText {
    pub tokens: Vec<Token>,
}

impl PreprocessedText {
    /// Space-joined rendering, e.g. `Compra # supermercado #PNxyz# Madrid`.
    pub fn surface(&self) -> String {
        self.to_string()
    }

    pub fn content_tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().filter_map(Token::content)
    }

    pub fn has_name_tag(&self) -> bool {
        self.tokens.iter().any(|t| matches!(t, Token::NameTag(_)))
    }
}

impl fmt::Display for PreprocessedText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

pub fn tokenize(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Removes every punctuation or symbol character except `.` and `,`.
pub fn strip_punctuation(token: &str) -> String {
    token
        .chars()
        .filter(|c| c.is_alphanumeric() || matches!(c, '.' | ','))
        .collect()
}

fn parse_marker(raw: &str) -> Option<Token> {
    if raw == "#" {
        return Some(Token::Placeholder);
    }
    let suffix = raw.strip_prefix("#PN")?.strip_suffix('#')?;
    (suffix.chars().count() == 3 && suffix.chars().all(|c| c.is_ascii_lowercase()))
        .then(|| Token::NameTag(suffix.to_string()))
}

pub fn preprocess(description: &str, gazetteer: &GazetteerConfig) -> PreprocessedText {
    let tokens = tokenize(description)
        .into_iter()
        .map(|raw| {
            if let Some(marker) = parse_marker(raw) {
                return marker;
            }
            let cleaned = strip_punctuation(raw);
            // `.`/`,` survive stripping but must not block list lookups (`en.`).
            let key = cleaned.trim_matches(['.', ',']).to_lowercase();
            if key.is_empty() || gazetteer.is_stopword(&key) {
                Token::Placeholder
            } else if gazetteer.is_name(&key) {
                Token::NameTag(name_suffix(&key))
            } else {
                Token::Content {
                    stripped: cleaned.len() != raw.len(),
                    text: cleaned,
                }
            }
        })
        .collect();
    PreprocessedText { tokens }
}
