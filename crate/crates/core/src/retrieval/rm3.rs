use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::bm25::{score_weighted, Bm25Params, QueryTerms};
use super::RetrievalError;
use crate::index::InvertedIndex;
use crate::run::Scored;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Rm3Params {
    pub fb_docs: usize,
    pub fb_terms: usize,
    /// Interpolation weight of the original query, in [0, 1].
    pub original_weight: f64,
}

impl Default for Rm3Params {
    fn default() -> Self {
        Self {
            fb_docs: 10,
            fb_terms: 10,
            original_weight: 0.5,
        }
    }
}

impl Rm3Params {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if self.fb_docs == 0 || self.fb_terms == 0 {
            return Err(RetrievalError::InvalidParams("fb_docs and fb_terms must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.original_weight) {
            return Err(RetrievalError::InvalidParams(format!(
                "original_weight must be in [0, 1], got {}",
                self.original_weight
            )));
        }
        Ok(())
    }
}

/// Relevance model over the feedback documents, truncated to `fb_terms`
/// and renormalised:
///
/// P(w|F) ∝ Σ_d P(w|d) · s(d), with P(w|d) = tf(w,d)/|d| and s the
/// softmax of the first-pass BM25 scores.
///
/// Sorted by descending probability, ties by term.
pub fn relevance_model(idx: &InvertedIndex, feedback: &[Scored], fb_terms: usize) -> Vec<(String, f64)> {
    if feedback.is_empty() {
        return Vec::new();
    }
    let max = feedback.iter().map(|d| d.score).fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = feedback.iter().map(|d| (d.score - max).exp()).collect();
    let z: f64 = exp.iter().sum();
    let mut model: HashMap<u32, f64> = HashMap::new();
    for (d, e) in feedback.iter().zip(&exp) {
        let ord = idx.ordinal(&d.surrogate_id).expect("feedback doc comes from this index");
        let len = idx.doc(ord).length as f64;
        let s = e / z;
        for &(tid, tf) in idx.doc_terms(ord) {
            *model.entry(tid).or_default() += tf as f64 / len * s;
        }
    }
    let tokenizer = idx.tokenizer();
    let mut terms: Vec<(String, f64)> = model
        .into_iter()
        .map(|(tid, p)| (idx.term(tid).to_string(), p))
        .filter(|(t, _)| !tokenizer.is_stopword(t))
        .collect();
    terms.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    terms.truncate(fb_terms);
    let total: f64 = terms.iter().map(|t| t.1).sum();
    if total > 0.0 {
        for t in &mut terms {
            t.1 /= total;
        }
    }
    terms
}

/// The expanded query: `original_weight` · uniform(original tokens) +
/// (1 − `original_weight`) · relevance model, renormalised to sum to 1.
/// Returned in descending weight order, ties by term.
pub fn rm3_expansion(
    idx: &InvertedIndex,
    query: &QueryTerms,
    bp: &Bm25Params,
    rp: &Rm3Params,
) -> Result<Vec<(String, f64)>, RetrievalError> {
    bp.validate()?;
    rp.validate()?;
    query.check(idx)?;
    let first = score_weighted(idx, &query.bag(), &Bm25Params { max_results: rp.fb_docs, ..*bp });
    Ok(interpolate(query, &relevance_model(idx, &first, rp.fb_terms), rp.original_weight))
}

fn interpolate(query: &QueryTerms, model: &[(String, f64)], alpha: f64) -> Vec<(String, f64)> {
    let mut weights: HashMap<String, f64> = HashMap::new();
    let n = query.tokens().len() as f64;
    for (t, c) in query.bag() {
        *weights.entry(t).or_default() += alpha * c / n;
    }
    for (t, p) in model {
        *weights.entry(t.clone()).or_default() += (1.0 - alpha) * p;
    }
    let mut out: Vec<(String, f64)> = weights.into_iter().filter(|(_, w)| *w > 0.0).collect();
    // sum in a fixed order so the weights do not depend on hash order
    out.sort_by(|a, b| a.0.cmp(&b.0));
    let total: f64 = out.iter().map(|t| t.1).sum();
    for t in &mut out {
        t.1 /= total;
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

/// BM25 with RM3 pseudo-relevance feedback. When the first pass finds
/// nothing, or `original_weight` is 1, the first-pass ranking is returned.
pub fn rm3_search(
    idx: &InvertedIndex,
    query: &QueryTerms,
    bp: &Bm25Params,
    rp: &Rm3Params,
) -> Result<Vec<Scored>, RetrievalError> {
    bp.validate()?;
    rp.validate()?;
    query.check(idx)?;
    let first = score_weighted(idx, &query.bag(), bp);
    if first.is_empty() || rp.original_weight == 1.0 {
        return Ok(first);
    }
    let fb = &first[..rp.fb_docs.min(first.len())];
    let expanded = interpolate(query, &relevance_model(idx, fb, rp.fb_terms), rp.original_weight);
    Ok(score_weighted(idx, &expanded, bp))
}
