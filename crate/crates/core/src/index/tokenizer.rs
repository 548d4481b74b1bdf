use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{porter, IndexError};

const DEFAULT_STOPWORDS: &str = include_str!("stopwords.txt");

/// Text analysis chain shared by indexing and querying.
///
/// Splits on every non-alphanumeric character, then applies lowercasing,
/// stopword removal and Porter stemming, in that order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    pub lowercase: bool,
    pub stem: bool,
    stopwords: Arc<BTreeSet<String>>,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Self {
            lowercase: true,
            stem: true,
            stopwords: Arc::new(parse_stopwords(DEFAULT_STOPWORDS)),
        }
    }
}

fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

impl Tokenizer {
    pub fn new(lowercase: bool, stem: bool, stopwords: impl IntoIterator<Item = String>) -> Self {
        Self {
            lowercase,
            stem,
            stopwords: Arc::new(stopwords.into_iter().collect()),
        }
    }

    /// No lowercasing, no stopwords, no stemming.
    pub fn raw() -> Self {
        Self::new(false, false, std::iter::empty())
    }

    pub fn with_stem(mut self, stem: bool) -> Self {
        self.stem = stem;
        self
    }

    pub fn with_lowercase(mut self, lowercase: bool) -> Self {
        self.lowercase = lowercase;
        self
    }

    pub fn with_stopwords(mut self, stopwords: impl IntoIterator<Item = String>) -> Self {
        self.stopwords = Arc::new(stopwords.into_iter().collect());
        self
    }

    pub fn without_stopwords(self) -> Self {
        self.with_stopwords(std::iter::empty())
    }

    /// Reads a stopword file, one term per line. Blank lines and `#` comments
    /// are skipped.
    pub fn load_stopwords(path: &Path) -> Result<BTreeSet<String>, IndexError> {
        let text = fs::read_to_string(path).map_err(|e| IndexError::io(path, e))?;
        Ok(parse_stopwords(&text))
    }

    pub fn stopwords(&self) -> &BTreeSet<String> {
        &self.stopwords
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .filter_map(|t| {
                let t = if self.lowercase {
                    t.to_lowercase()
                } else {
                    t.to_string()
                };
                if self.stopwords.contains(&t) {
                    return None;
                }
                Some(if self.stem { porter::stem(&t) } else { t })
            })
            .collect()
    }

    /// Stable digest of the configuration. Stored in every index so that
    /// queries analysed differently from the documents are rejected.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("lowercase={};stem=porter:{};stop=", self.lowercase, self.stem));
        for w in self.stopwords.iter() {
            h.update(w.as_bytes());
            h.update(b"\n");
        }
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Lowercased alphanumeric runs with no stopwords or stemming. Used for
/// dictionary matching (lexicon surfaces, ontology labels).
pub fn simple_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}
