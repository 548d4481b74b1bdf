use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use super::QueryError;
use crate::index::simple_tokens;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Entity {
    pub label: String,
    pub entity_type: String,
}

/// Surface form to entity dictionary. Surfaces are matched on lowercased
/// alphanumeric tokens, so `SARS-CoV-2` and `sars cov 2` are the same key.
#[derive(Debug, Clone, Default)]
pub struct EntityLexicon {
    entries: HashMap<String, Entity>,
    max_len: usize,
}

impl EntityLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an entry. The first entry for a surface wins; returns false if
    /// the surface is empty after normalisation or already present.
    pub fn insert(&mut self, surface: &str, label: &str, entity_type: &str) -> bool {
        let tokens = simple_tokens(surface);
        if tokens.is_empty() {
            return false;
        }
        let key = tokens.join(" ");
        if self.entries.contains_key(&key) {
            return false;
        }
        self.max_len = self.max_len.max(tokens.len());
        self.entries.insert(
            key,
            Entity {
                label: label.trim().to_string(),
                entity_type: entity_type.trim().to_string(),
            },
        );
        true
    }

    /// Reads a TSV file with columns `surface`, `label`, `entity_type`.
    /// A header row with those names and `#` comments are skipped.
    pub fn load(path: &Path) -> Result<Self, QueryError> {
        let text = fs::read_to_string(path).map_err(|e| QueryError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, QueryError> {
        let mut lex = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(QueryError::MalformedLine {
                    line: i + 1,
                    reason: format!("expected 3 tab-separated columns, found {}", cols.len()),
                });
            }
            if i == 0 && cols[0] == "surface" && cols[1] == "label" {
                continue;
            }
            if simple_tokens(cols[0]).is_empty() || cols[1].trim().is_empty() {
                return Err(QueryError::MalformedLine {
                    line: i + 1,
                    reason: "empty surface or label".into(),
                });
            }
            lex.insert(cols[0], cols[1], cols[2]);
        }
        Ok(lex)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, surface: &str) -> Option<&Entity> {
        self.entries.get(&simple_tokens(surface).join(" "))
    }

    pub(crate) fn lookup_tokens(&self, tokens: &[String]) -> Option<&Entity> {
        self.entries.get(&tokens.join(" "))
    }

    pub(crate) fn max_len(&self) -> usize {
        self.max_len
    }
}

/// Greedy longest-match, left to right, non-overlapping. Repeated entities
/// are reported once, at their first occurrence.
pub fn extract_entities(text: &str, lexicon: &EntityLexicon) -> Vec<Entity> {
    let tokens = simple_tokens(text);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut i = 0;
    while i < tokens.len() {
        let longest = lexicon.max_len().min(tokens.len() - i);
        let hit = (1..=longest)
            .rev()
            .find_map(|len| lexicon.lookup_tokens(&tokens[i..i + len]).map(|e| (len, e)));
        match hit {
            Some((len, e)) => {
                if seen.insert(e.clone()) {
                    out.push(e.clone());
                }
                i += len;
            }
            None => i += 1,
        }
    }
    out
}
