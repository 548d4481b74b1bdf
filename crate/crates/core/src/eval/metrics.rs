use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::report::{MetricReport, TopicMetrics};
use super::{EvalError, Grade, Qrels};
use crate::run::{trec_order, Run, RunEntry};

/// Judgments for one topic.
type Judged = BTreeMap<String, Grade>;

/// Document ids in the order trec_eval evaluates them: descending score,
/// ties by descending id. The rank column is ignored.
pub fn evaluation_order(entries: &[RunEntry]) -> Vec<&str> {
    let mut sorted: Vec<&RunEntry> = entries.iter().collect();
    sorted.sort_by(|a, b| trec_order(a.score, &a.surrogate_id, b.score, &b.surrogate_id));
    sorted.into_iter().map(|e| e.surrogate_id.as_str()).collect()
}

fn grade(judged: &Judged, doc: &str) -> Option<Grade> {
    judged.get(doc).copied()
}

fn is_rel(judged: &Judged, doc: &str) -> bool {
    grade(judged, doc).is_some_and(|g| g >= 1)
}

fn num_rel(judged: &Judged) -> usize {
    judged.values().filter(|g| **g >= 1).count()
}

/// Relevant documents in the top `k`, divided by `k`.
pub fn precision_at_k(ranking: &[&str], judged: &Judged, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let hits = ranking.iter().take(k).filter(|d| is_rel(judged, d)).count();
    hits as f64 / k as f64
}

/// Linear-gain NDCG with a log2(i + 1) discount. The ideal ranking is
/// built from every grade in `judged`.
pub fn ndcg_at_k(ranking: &[&str], judged: &Judged, k: usize) -> f64 {
    let discount = |i: usize| ((i + 2) as f64).log2();
    let dcg: f64 = ranking
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, d)| grade(judged, d).unwrap_or(0) as f64 / discount(i))
        .sum();
    let mut ideal: Vec<Grade> = judged.values().copied().filter(|g| *g > 0).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal.iter().take(k).enumerate().map(|(i, g)| *g as f64 / discount(i)).sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

/// trec_eval's bpref. Unjudged documents are skipped; only judged
/// non-relevant documents ranked above a relevant one count against it.
pub fn bpref(ranking: &[&str], judged: &Judged) -> f64 {
    let r = num_rel(judged);
    if r == 0 {
        return 0.0;
    }
    let n = judged.len() - r;
    let denom = r.min(n) as f64;
    let mut nonrel_above = 0usize;
    let mut sum = 0.0;
    for d in ranking {
        match grade(judged, d) {
            Some(g) if g >= 1 => {
                sum += if nonrel_above > 0 {
                    1.0 - nonrel_above.min(r) as f64 / denom
                } else {
                    1.0
                };
            }
            Some(_) => nonrel_above += 1,
            None => {}
        }
    }
    sum / r as f64
}

/// Rank-biased precision with persistence `p`, binary relevance, over the
/// whole ranking. No residual is reported.
pub fn rbp(ranking: &[&str], judged: &Judged, p: f64) -> f64 {
    let mut weight = 1.0 - p;
    let mut sum = 0.0;
    for d in ranking {
        if is_rel(judged, d) {
            sum += weight;
        }
        weight *= p;
    }
    sum
}

/// Mean of the precision at each relevant document's rank, over all
/// relevant documents (retrieved or not).
pub fn average_precision(ranking: &[&str], judged: &Judged) -> f64 {
    let r = num_rel(judged);
    if r == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, d) in ranking.iter().enumerate() {
        if is_rel(judged, d) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / r as f64
}

/// A single effectiveness measure, for places that rank runs by one number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMetric {
    Map,
    Bpref,
    Rbp,
    PrecisionAt(usize),
    NdcgAt(usize),
}

impl Default for EvalMetric {
    fn default() -> Self {
        Self::Map
    }
}

impl fmt::Display for EvalMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Map => f.write_str("map"),
            Self::Bpref => f.write_str("bpref"),
            Self::Rbp => f.write_str("rbp"),
            Self::PrecisionAt(k) => write!(f, "P@{k}"),
            Self::NdcgAt(k) => write!(f, "ndcg@{k}"),
        }
    }
}

/// Accepts `map`, `bpref`, `rbp`, `P@10` / `P_10`, `ndcg@10` / `ndcg_cut_10`.
impl FromStr for EvalMetric {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        let cut = |prefixes: &[&str]| {
            prefixes
                .iter()
                .find_map(|p| lower.strip_prefix(p))
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|k| *k > 0)
        };
        match lower.as_str() {
            "map" => Ok(Self::Map),
            "bpref" => Ok(Self::Bpref),
            "rbp" => Ok(Self::Rbp),
            _ => {
                if let Some(k) = cut(&["p@", "p_"]) {
                    Ok(Self::PrecisionAt(k))
                } else if let Some(k) = cut(&["ndcg@", "ndcg_cut_"]) {
                    Ok(Self::NdcgAt(k))
                } else {
                    Err(EvalError::UnknownMetric(s.to_string()))
                }
            }
        }
    }
}

/// One metric for one topic; `rbp` uses p = 0.5.
pub fn topic_metric(metric: EvalMetric, ranking: &[&str], judged: &Judged) -> f64 {
    match metric {
        EvalMetric::Map => average_precision(ranking, judged),
        EvalMetric::Bpref => bpref(ranking, judged),
        EvalMetric::Rbp => rbp(ranking, judged, 0.5),
        EvalMetric::PrecisionAt(k) => precision_at_k(ranking, judged, k),
        EvalMetric::NdcgAt(k) => ndcg_at_k(ranking, judged, k),
    }
}

/// Mean of `metric` over qrels topics with at least one relevant document.
/// Topics missing from the run score 0.
pub fn mean_metric(run: &Run, qrels: &Qrels, metric: EvalMetric) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for topic in qrels.topics() {
        let judged = qrels.topic(topic).expect("topic listed by qrels");
        if num_rel(judged) == 0 {
            continue;
        }
        sum += topic_metric(metric, &evaluation_order(run.entries(topic)), judged);
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    /// Cutoffs for P@K and NDCG@K.
    pub cuts: Vec<usize>,
    pub rbp_p: f64,
    /// Score qrels topics absent from the run as 0 and keep them in the
    /// means (trec_eval `-c`).
    pub include_missing_topics: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            cuts: vec![5, 10, 15, 20, 30],
            rbp_p: 0.5,
            include_missing_topics: true,
        }
    }
}

fn topic_metrics(ranking: &[&str], judged: &Judged, opts: &EvalOptions) -> TopicMetrics {
    TopicMetrics {
        precision: opts.cuts.iter().map(|&k| precision_at_k(ranking, judged, k)).collect(),
        ndcg: opts.cuts.iter().map(|&k| ndcg_at_k(ranking, judged, k)).collect(),
        bpref: bpref(ranking, judged),
        rbp: rbp(ranking, judged, opts.rbp_p),
        map: average_precision(ranking, judged),
        num_ret: ranking.len(),
        num_rel: num_rel(judged),
        num_rel_ret: ranking.iter().filter(|d| is_rel(judged, d)).count(),
    }
}

/// Every metric for every evaluable topic, plus means.
///
/// A topic is evaluable when the qrels give it at least one relevant
/// document and, unless `include_missing_topics` is set, the run has it.
/// Run topics absent from the qrels are listed in `unjudged_topics`.
pub fn evaluate_all(run: &Run, qrels: &Qrels, opts: &EvalOptions) -> MetricReport {
    let mut per_topic = BTreeMap::new();
    for topic in qrels.topics() {
        let judged = qrels.topic(topic).expect("topic listed by qrels");
        if num_rel(judged) == 0 {
            continue;
        }
        let entries = run.entries(topic);
        if entries.is_empty() && !opts.include_missing_topics {
            continue;
        }
        per_topic.insert(topic, topic_metrics(&evaluation_order(entries), judged, opts));
    }
    let unjudged_topics = run.topics().filter(|t| qrels.topic(*t).is_none()).collect();
    MetricReport::new(run.tag().to_string(), opts.cuts.clone(), per_topic, unjudged_topics)
}
