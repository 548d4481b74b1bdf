//! Scoring and reranking over an [`InvertedIndex`](crate::index::InvertedIndex).
//!
//! All searches return `Vec<Scored>` in rank order; [`Run`](crate::run::Run)
//! turns per-topic results into a TREC run.

mod bm25;
mod rerank;
mod rm3;

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use crate::run::{Run, RunEntry, Scored};
pub use bm25::{bm25_search, idf, term_score, weighted_bm25_search, Bm25Params, QueryTerms};
pub use rerank::{
    collapse_paragraphs, cosine, recency_rerank, similarity_rerank, similarity_rerank_topic, VectorStore,
};
pub use rm3::{relevance_model, rm3_expansion, rm3_search, Rm3Params};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("query tokenizer {query} does not match index tokenizer {index}")]
    TokenizerMismatch { index: String, query: String },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("document `{0}` not found in corpus")]
    UnknownDocId(String),
    #[error("vector for `{id}` has dimension {found}, expected {expected}")]
    DimensionMismatch { id: String, expected: usize, found: usize },
    #[error("no vector for `{0}`")]
    MissingVector(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
}

impl RetrievalError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
