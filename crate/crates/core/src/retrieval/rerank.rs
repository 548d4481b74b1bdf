use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;

use super::RetrievalError;
use crate::corpus::Corpus;
use crate::run::{trec_order, Run, RunEntry};

/// Within the first `top_n` entries of every topic, moves documents
/// published in `boost_year` ahead of the rest. Both groups keep their
/// order; entries past `top_n` are left where they are. Scores are
/// rewritten as `n - rank + 1`.
pub fn recency_rerank(run: &Run, corpus: &Corpus, top_n: usize, boost_year: u16) -> Result<Run, RetrievalError> {
    let mut out = Run::new(run.tag());
    for (topic, entries) in run.iter() {
        let cut = top_n.min(entries.len());
        let mut boosted = Vec::new();
        let mut rest = Vec::new();
        for e in &entries[..cut] {
            let rec = corpus
                .get(&e.original_id)
                .ok_or_else(|| RetrievalError::UnknownDocId(e.original_id.clone()))?;
            if rec.publish_year == Some(boost_year) {
                boosted.push(e.clone());
            } else {
                rest.push(e.clone());
            }
        }
        boosted.extend(rest);
        boosted.extend_from_slice(&entries[cut..]);
        out.insert_ordered(topic, boosted);
    }
    Ok(out)
}

/// Dense vectors keyed by id. Topic vectors use the key `topic:<n>`.
#[derive(Debug, Clone, Default)]
pub struct VectorStore {
    vectors: HashMap<String, Vec<f64>>,
}

#[derive(Deserialize)]
struct VectorLine {
    id: String,
    vector: Vec<f64>,
}

impl VectorStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f64>) {
        self.vectors.insert(id.into(), vector);
    }

    /// Reads JSONL, one `{"id": ..., "vector": [...]}` per line.
    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let file = File::open(path).map_err(|e| RetrievalError::io(path, e))?;
        let mut store = Self::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| RetrievalError::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let v: VectorLine = serde_json::from_str(&line).map_err(|e| RetrievalError::MalformedLine {
                line: i + 1,
                reason: e.to_string(),
            })?;
            store.insert(v.id, v.vector);
        }
        Ok(store)
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    pub fn topic_key(topic: u32) -> String {
        format!("topic:{topic}")
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Cosine similarity; zero when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Reorders the first `top_n` entries by descending cosine similarity to
/// `topic_vector` (stable on ties); the tail is left in place.
pub fn similarity_rerank_topic(
    entries: &[RunEntry],
    doc_vectors: &VectorStore,
    topic_vector: &[f64],
    top_n: usize,
) -> Result<Vec<RunEntry>, RetrievalError> {
    let cut = top_n.min(entries.len());
    let mut scored = Vec::with_capacity(cut);
    for e in &entries[..cut] {
        let v = doc_vectors
            .get(&e.surrogate_id)
            .ok_or_else(|| RetrievalError::MissingVector(e.surrogate_id.clone()))?;
        if v.len() != topic_vector.len() {
            return Err(RetrievalError::DimensionMismatch {
                id: e.surrogate_id.clone(),
                expected: topic_vector.len(),
                found: v.len(),
            });
        }
        scored.push((cosine(v, topic_vector), e.clone()));
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut out: Vec<RunEntry> = scored.into_iter().map(|(_, e)| e).collect();
    out.extend_from_slice(&entries[cut..]);
    Ok(out)
}

/// [`similarity_rerank_topic`] over every topic, looking topic vectors up
/// under `topic:<n>` in `vectors`.
pub fn similarity_rerank(run: &Run, vectors: &VectorStore, top_n: usize) -> Result<Run, RetrievalError> {
    let mut out = Run::new(run.tag());
    for (topic, entries) in run.iter() {
        let key = VectorStore::topic_key(topic);
        let tv = vectors.get(&key).ok_or(RetrievalError::MissingVector(key))?;
        out.insert_ordered(topic, similarity_rerank_topic(entries, vectors, tv, top_n)?);
    }
    Ok(out)
}

/// Keeps the first entry of each original document, replaces surrogate ids
/// with original ids and re-ranks 1..m. Scores are kept.
pub fn collapse_paragraphs(run: &Run) -> Run {
    let mut out = Run::new(run.tag());
    for (topic, entries) in run.iter() {
        let mut seen = HashSet::new();
        let mut kept: Vec<RunEntry> = entries
            .iter()
            .filter(|e| seen.insert(e.original_id.as_str()))
            .map(|e| RunEntry {
                surrogate_id: e.original_id.clone(),
                ..e.clone()
            })
            .collect();
        // Scores are still non-increasing; only the id tie-break can change
        // once surrogate ids are replaced.
        kept.sort_by(|a, b| trec_order(a.score, &a.surrogate_id, b.score, &b.surrogate_id));
        for (i, e) in kept.iter_mut().enumerate() {
            e.rank = i + 1;
        }
        out.insert_raw(topic, kept);
    }
    out
}
