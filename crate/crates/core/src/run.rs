//! Ranked result lists in TREC run form.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fmt;

/// Per-topic result cap for submitted runs.
pub const MAX_RESULTS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub topic: u32,
    pub surrogate_id: String,
    pub original_id: String,
    /// 1-based.
    pub rank: usize,
    pub score: f64,
    pub tag: String,
}

/// A scored document before ranks are assigned.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub surrogate_id: String,
    pub original_id: String,
    pub score: f64,
}

impl Scored {
    pub fn new(surrogate_id: impl Into<String>, original_id: impl Into<String>, score: f64) -> Self {
        Self {
            surrogate_id: surrogate_id.into(),
            original_id: original_id.into(),
            score,
        }
    }
}

/// Descending score, then descending id. This is the order trec_eval
/// itself imposes, so written ranks and evaluated ranks agree.
pub fn trec_order(a_score: f64, a_id: &str, b_score: f64, b_id: &str) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| b_id.cmp(a_id))
}

/// Sorts in trec order and keeps the best `max_results`.
pub fn rank_scored(mut docs: Vec<Scored>, max_results: usize) -> Vec<Scored> {
    let cmp = |a: &Scored, b: &Scored| trec_order(a.score, &a.surrogate_id, b.score, &b.surrogate_id);
    if max_results == 0 {
        return Vec::new();
    }
    if docs.len() > max_results {
        docs.select_nth_unstable_by(max_results - 1, cmp);
        docs.truncate(max_results);
    }
    docs.sort_by(cmp);
    docs
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Run {
    tag: String,
    topics: BTreeMap<u32, Vec<RunEntry>>,
}

impl Run {
    pub fn new(tag: impl Into<String>) -> Self {
        Self {
            tag: tag.into(),
            topics: BTreeMap::new(),
        }
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    /// Renames the run and every entry in it.
    pub fn set_tag(&mut self, tag: impl Into<String>) {
        self.tag = tag.into();
        for e in self.topics.values_mut().flatten() {
            e.tag.clone_from(&self.tag);
        }
    }

    /// Sorts `docs` in trec order, keeps the first `max_results` and stores
    /// them as the ranking for `topic`. Replaces any previous ranking.
    pub fn insert_scored(&mut self, topic: u32, docs: Vec<Scored>, max_results: usize) {
        let entries = rank_scored(docs, max_results)
            .into_iter()
            .enumerate()
            .map(|(i, d)| RunEntry {
                topic,
                surrogate_id: d.surrogate_id,
                original_id: d.original_id,
                rank: i + 1,
                score: d.score,
                tag: self.tag.clone(),
            })
            .collect();
        self.topics.insert(topic, entries);
    }

    /// Stores an already ordered ranking. Ranks become 1..n and scores
    /// `n - rank + 1`, so the score column agrees with the new order.
    pub fn insert_ordered(&mut self, topic: u32, order: Vec<RunEntry>) {
        let n = order.len();
        let entries = order
            .into_iter()
            .enumerate()
            .map(|(i, mut e)| {
                e.topic = topic;
                e.rank = i + 1;
                e.score = (n - i) as f64;
                e.tag.clone_from(&self.tag);
                e
            })
            .collect();
        self.topics.insert(topic, entries);
    }

    /// Stores entries verbatim, as read from a file.
    pub(crate) fn insert_raw(&mut self, topic: u32, entries: Vec<RunEntry>) {
        self.topics.insert(topic, entries);
    }

    pub fn topics(&self) -> impl Iterator<Item = u32> + '_ {
        self.topics.keys().copied()
    }

    pub fn topic_set(&self) -> HashSet<u32> {
        self.topics.keys().copied().collect()
    }

    pub fn entries(&self, topic: u32) -> &[RunEntry] {
        self.topics.get(&topic).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &[RunEntry])> {
        self.topics.iter().map(|(t, e)| (*t, e.as_slice()))
    }

    pub fn all_entries(&self) -> impl Iterator<Item = &RunEntry> {
        self.topics.values().flatten()
    }

    pub fn len(&self) -> usize {
        self.topics.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks the ranking invariants. An empty result means the run is valid.
    pub fn validate(&self) -> Vec<RunIssue> {
        let mut issues = Vec::new();
        for (&topic, entries) in &self.topics {
            if entries.len() > MAX_RESULTS {
                issues.push(RunIssue::CapExceeded {
                    topic,
                    count: entries.len(),
                });
            }
            let mut seen = HashSet::new();
            for (i, e) in entries.iter().enumerate() {
                if e.rank != i + 1 {
                    issues.push(RunIssue::RankGap {
                        topic,
                        expected: i + 1,
                        found: e.rank,
                    });
                    break;
                }
                if !seen.insert(e.surrogate_id.as_str()) {
                    issues.push(RunIssue::DuplicateDoc {
                        topic,
                        doc_id: e.surrogate_id.clone(),
                    });
                }
            }
            for w in entries.windows(2) {
                if trec_order(w[0].score, &w[0].surrogate_id, w[1].score, &w[1].surrogate_id) == Ordering::Greater {
                    issues.push(RunIssue::OrderViolation {
                        topic,
                        rank: w[1].rank,
                    });
                    break;
                }
            }
        }
        issues
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunIssue {
    CapExceeded { topic: u32, count: usize },
    RankGap { topic: u32, expected: usize, found: usize },
    DuplicateDoc { topic: u32, doc_id: String },
    /// Score increases with rank, or an equal-score pair is not in
    /// descending id order.
    OrderViolation { topic: u32, rank: usize },
}

impl fmt::Display for RunIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::CapExceeded { topic, count } => {
                write!(f, "topic {topic}: {count} entries exceeds the {MAX_RESULTS}-result cap")
            }
            Self::RankGap { topic, expected, found } => {
                write!(f, "topic {topic}: expected rank {expected}, found {found}")
            }
            Self::DuplicateDoc { topic, doc_id } => write!(f, "topic {topic}: duplicate document {doc_id}"),
            Self::OrderViolation { topic, rank } => {
                write!(f, "topic {topic}: rank {rank} out of score/id order")
            }
        }
    }
}
