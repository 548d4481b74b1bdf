use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::RetrievalError;
use crate::index::{InvertedIndex, Tokenizer};
use crate::query::WeightedQuery;
use crate::run::{rank_scored, Scored, MAX_RESULTS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
    pub max_results: usize,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self {
            k1: 1.2,
            b: 0.75,
            max_results: MAX_RESULTS,
        }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if !(self.k1 >= 0.0) {
            return Err(RetrievalError::InvalidParams(format!("k1 must be >= 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(RetrievalError::InvalidParams(format!("b must be in [0, 1], got {}", self.b)));
        }
        if self.max_results == 0 {
            return Err(RetrievalError::InvalidParams("max_results must be >= 1".into()));
        }
        Ok(())
    }
}

/// `ln(1 + (N - df + 0.5) / (df + 0.5))`; never negative.
pub fn idf(num_docs: usize, df: usize) -> f64 {
    let n = num_docs as f64;
    let df = df as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

/// Contribution of one query term occurrence to a document's score.
pub fn term_score(idf: f64, tf: u32, doc_len: u32, avgdl: f64, p: &Bm25Params) -> f64 {
    let tf = tf as f64;
    let norm = p.k1 * (1.0 - p.b + p.b * doc_len as f64 / avgdl);
    idf * tf * (p.k1 + 1.0) / (tf + norm)
}

/// Query tokens, tagged with the fingerprint of the tokenizer that
/// produced them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryTerms {
    tokens: Vec<String>,
    fingerprint: String,
}

impl QueryTerms {
    pub fn analyze(text: &str, tokenizer: &Tokenizer) -> Self {
        Self {
            tokens: tokenizer.tokenize(text),
            fingerprint: tokenizer.fingerprint(),
        }
    }

    /// Wraps tokens that were produced by `tokenizer` elsewhere.
    pub fn from_tokens(tokens: Vec<String>, tokenizer: &Tokenizer) -> Self {
        Self {
            tokens,
            fingerprint: tokenizer.fingerprint(),
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub(crate) fn check(&self, idx: &InvertedIndex) -> Result<(), RetrievalError> {
        let expected = idx.tokenizer().fingerprint();
        if self.fingerprint != expected {
            return Err(RetrievalError::TokenizerMismatch {
                index: expected,
                query: self.fingerprint.clone(),
            });
        }
        Ok(())
    }

    /// Token counts in first-occurrence order.
    pub(crate) fn bag(&self) -> Vec<(String, f64)> {
        let mut pos: HashMap<&str, usize> = HashMap::new();
        let mut out: Vec<(String, f64)> = Vec::new();
        for t in &self.tokens {
            match pos.get(t.as_str()) {
                Some(&i) => out[i].1 += 1.0,
                None => {
                    pos.insert(t, out.len());
                    out.push((t.clone(), 1.0));
                }
            }
        }
        out
    }
}

/// Σ weight(t) · bm25(t, d) over every document containing at least one
/// positively weighted term. Terms absent from the index are ignored.
pub(crate) fn score_weighted(idx: &InvertedIndex, weights: &[(String, f64)], p: &Bm25Params) -> Vec<Scored> {
    let n = idx.num_docs();
    let avgdl = idx.avgdl();
    let mut acc: HashMap<u32, f64> = HashMap::new();
    for (term, w) in weights {
        if *w <= 0.0 {
            continue;
        }
        let Some(id) = idx.term_id(term) else { continue };
        let plist = idx.postings_by_id(id);
        let term_idf = idf(n, plist.len());
        for posting in plist {
            let dl = idx.doc(posting.doc).length;
            *acc.entry(posting.doc).or_default() += w * term_score(term_idf, posting.tf, dl, avgdl, p);
        }
    }
    let docs = acc
        .into_iter()
        .map(|(ord, score)| {
            let d = idx.doc(ord);
            Scored::new(d.surrogate_id.clone(), d.original_id.clone(), score)
        })
        .collect();
    rank_scored(docs, p.max_results)
}

/// Plain BM25. Repeated query tokens count once per occurrence. The result
/// is in rank order (descending score, ties by descending id), at most
/// `max_results` long.
pub fn bm25_search(idx: &InvertedIndex, query: &QueryTerms, p: &Bm25Params) -> Result<Vec<Scored>, RetrievalError> {
    p.validate()?;
    query.check(idx)?;
    Ok(score_weighted(idx, &query.bag(), p))
}

/// BM25 with per-term weights: each weighted term is analysed with
/// `tokenizer`, and every resulting token contributes
/// `weight · bm25(token, d)`. Multi-word terms thus act as a bag of their
/// words at the term's weight.
pub fn weighted_bm25_search(
    idx: &InvertedIndex,
    query: &WeightedQuery,
    tokenizer: &Tokenizer,
    p: &Bm25Params,
) -> Result<Vec<Scored>, RetrievalError> {
    p.validate()?;
    let mut weights: Vec<(String, f64)> = Vec::new();
    let mut pos: HashMap<String, usize> = HashMap::new();
    for term in &query.terms {
        let analysed = QueryTerms::analyze(&term.text, tokenizer);
        analysed.check(idx)?;
        for tok in analysed.tokens {
            match pos.get(&tok) {
                Some(&i) => weights[i].1 += term.weight(),
                None => {
                    pos.insert(tok.clone(), weights.len());
                    weights.push((tok, term.weight()));
                }
            }
        }
    }
    Ok(score_weighted(idx, &weights, p))
}
