//! Tokenization and the immutable in-memory inverted index.

pub mod porter;
mod tokenizer;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{IndexVariant, IndexableDoc};

pub use tokenizer::{simple_tokens, Tokenizer};

const MAGIC: &[u8; 8] = b"CVSIDX\0\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("cannot build an index from zero documents")]
    EmptyCorpus,
    #[error("duplicate surrogate id `{0}`")]
    DuplicateSurrogateId(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("index format version mismatch: expected {expected}, found {found}")]
    FormatVersionMismatch { expected: String, found: String },
    #[error("corrupt index: {0}")]
    Corrupt(String),
}

impl IndexError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocEntry {
    pub surrogate_id: String,
    pub original_id: String,
    pub length: u32,
}

// Everything that goes to disk. Terms are sorted so that the serialized
// form is a pure function of the input documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Stored {
    variant: IndexVariant,
    tokenizer: Tokenizer,
    terms: Vec<String>,
    postings: Vec<Vec<Posting>>,
    docs: Vec<DocEntry>,
    total_terms: u64,
}

#[derive(Debug, Clone)]
pub struct InvertedIndex {
    stored: Stored,
    term_ids: HashMap<String, u32>,
    ordinals: HashMap<String, u32>,
    // per-document (term id, tf), ascending term id; derived from postings
    forward: Vec<Vec<(u32, u32)>>,
}

impl PartialEq for InvertedIndex {
    fn eq(&self, other: &Self) -> bool {
        self.stored == other.stored
    }
}

impl InvertedIndex {
    /// Builds the index. Document ordinals follow input order.
    pub fn build(docs: &[IndexableDoc], tokenizer: &Tokenizer) -> Result<Self, IndexError> {
        if docs.is_empty() {
            return Err(IndexError::EmptyCorpus);
        }
        let variant = docs[0].variant;
        let mut seen = HashSet::with_capacity(docs.len());
        let mut by_term: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut entries = Vec::with_capacity(docs.len());
        let mut total_terms = 0u64;
        for (ord, d) in docs.iter().enumerate() {
            if !seen.insert(d.surrogate_id.as_str()) {
                return Err(IndexError::DuplicateSurrogateId(d.surrogate_id.clone()));
            }
            let tokens = tokenizer.tokenize(&d.text);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in &tokens {
                *tf.entry(t.clone()).or_default() += 1;
            }
            for (term, count) in tf {
                by_term.entry(term).or_default().push(Posting {
                    doc: ord as u32,
                    tf: count,
                });
            }
            total_terms += tokens.len() as u64;
            entries.push(DocEntry {
                surrogate_id: d.surrogate_id.clone(),
                original_id: d.original_id.clone(),
                length: tokens.len() as u32,
            });
        }
        let (terms, postings) = by_term.into_iter().unzip();
        Ok(Self::from_stored(Stored {
            variant,
            tokenizer: tokenizer.clone(),
            terms,
            postings,
            docs: entries,
            total_terms,
        }))
    }

    fn from_stored(stored: Stored) -> Self {
        let term_ids = stored
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        let mut forward = vec![Vec::new(); stored.docs.len()];
        for (tid, plist) in stored.postings.iter().enumerate() {
            for p in plist {
                forward[p.doc as usize].push((tid as u32, p.tf));
            }
        }
        let ordinals = stored
            .docs
            .iter()
            .enumerate()
            .map(|(i, d)| (d.surrogate_id.clone(), i as u32))
            .collect();
        Self {
            stored,
            term_ids,
            ordinals,
            forward,
        }
    }

    pub fn variant(&self) -> IndexVariant {
        self.stored.variant
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.stored.tokenizer
    }

    pub fn num_docs(&self) -> usize {
        self.stored.docs.len()
    }

    pub fn num_terms(&self) -> usize {
        self.stored.terms.len()
    }

    pub fn total_terms(&self) -> u64 {
        self.stored.total_terms
    }

    pub fn avgdl(&self) -> f64 {
        self.stored.total_terms as f64 / self.stored.docs.len() as f64
    }

    pub fn term_id(&self, term: &str) -> Option<u32> {
        self.term_ids.get(term).copied()
    }

    pub fn term(&self, id: u32) -> &str {
        &self.stored.terms[id as usize]
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.stored.terms.iter().map(String::as_str)
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.term_id(term)
            .map(|id| self.postings_by_id(id))
            .unwrap_or(&[])
    }

    pub fn postings_by_id(&self, id: u32) -> &[Posting] {
        &self.stored.postings[id as usize]
    }

    pub fn df(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    pub fn doc(&self, ordinal: u32) -> &DocEntry {
        &self.stored.docs[ordinal as usize]
    }

    pub fn ordinal(&self, surrogate_id: &str) -> Option<u32> {
        self.ordinals.get(surrogate_id).copied()
    }

    pub fn docs(&self) -> &[DocEntry] {
        &self.stored.docs
    }

    /// Term vector of a document as (term id, tf), ascending by term id.
    pub fn doc_terms(&self, ordinal: u32) -> &[(u32, u32)] {
        &self.forward[ordinal as usize]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(1 << 16);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        bincode::serialize_into(&mut out, &self.stored).expect("in-memory serialization");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IndexError> {
        if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
            return Err(IndexError::FormatVersionMismatch {
                expected: format!("covsearch index v{FORMAT_VERSION}"),
                found: "unrecognized header".into(),
            });
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(IndexError::FormatVersionMismatch {
                expected: format!("v{FORMAT_VERSION}"),
                found: format!("v{version}"),
            });
        }
        let mut payload = &bytes[12..];
        let stored: Stored =
            bincode::deserialize_from(&mut payload).map_err(|e| IndexError::Corrupt(e.to_string()))?;
        if !payload.is_empty() {
            return Err(IndexError::Corrupt(format!("{} trailing bytes", payload.len())));
        }
        validate(&stored)?;
        Ok(Self::from_stored(stored))
    }

    /// Writes the index to `path` (write to a sibling temp file, then rename).
    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        crate::util::write_atomic(path, &self.to_bytes()).map_err(|e| IndexError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, IndexError> {
        let bytes = fs::read(path).map_err(|e| IndexError::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn validate(s: &Stored) -> Result<(), IndexError> {
    let corrupt = |m: String| Err(IndexError::Corrupt(m));
    if s.docs.is_empty() {
        return corrupt("no documents".into());
    }
    if s.terms.len() != s.postings.len() {
        return corrupt("term table and postings disagree".into());
    }
    if s.terms.windows(2).any(|w| w[0] >= w[1]) {
        return corrupt("term table not sorted".into());
    }
    let mut lens = vec![0u64; s.docs.len()];
    for (term, plist) in s.terms.iter().zip(&s.postings) {
        if plist.is_empty() {
            return corrupt(format!("empty postings for `{term}`"));
        }
        if plist.windows(2).any(|w| w[0].doc >= w[1].doc) {
            return corrupt(format!("postings for `{term}` not sorted"));
        }
        for p in plist {
            match lens.get_mut(p.doc as usize) {
                Some(l) => *l += p.tf as u64,
                None => return corrupt(format!("posting for `{term}` references doc {}", p.doc)),
            }
        }
    }
    if lens.iter().zip(&s.docs).any(|(l, d)| *l != d.length as u64) {
        return corrupt("document lengths do not match postings".into());
    }
    if lens.iter().sum::<u64>() != s.total_terms {
        return corrupt("total term count does not match".into());
    }
    Ok(())
}
