//! TREC run and qrels I/O, effectiveness metrics and qrels analyses.
//!
//! Metric conventions follow trec_eval: rankings are ordered by descending
//! score with ties broken by descending document id, grade ≥ 1 counts as
//! relevant for the binary measures, and NDCG uses raw grades as gains.

mod analysis;
mod io;
mod metrics;
mod report;

use std::collections::BTreeMap;
use std::path::PathBuf;

use thiserror::Error;

pub use analysis::{agreement, source_stats, Agreement, SourceRow, SourceTable};
pub use io::{format_qrels, format_run, parse_qrels_str, parse_run_str, read_qrels, read_run, write_qrels, write_run};
pub use metrics::{
    average_precision, bpref, evaluate_all, evaluation_order, mean_metric, ndcg_at_k, precision_at_k, rbp,
    topic_metric, EvalMetric, EvalOptions,
};
pub use report::{MetricReport, TopicMetrics};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("topic {topic}: expected rank {expected}, found {found}")]
    RankGap { topic: u32, expected: usize, found: usize },
    #[error("line {line}: grade {grade} is not one of 0, 1, 2")]
    InvalidGrade { line: usize, grade: String },
    #[error("topic {topic}: document `{doc_id}` judged twice")]
    DuplicateJudgment { topic: u32, doc_id: String },
    #[error("the two qrels share no judged (topic, document) pair")]
    NoOverlap,
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
}

impl EvalError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Relevance grades: 0 not relevant, 1 partially relevant, 2 relevant.
pub type Grade = u8;

/// Graded judgments, topic → document → grade.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<u32, BTreeMap<String, Grade>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a judgment. Grades above 2 are not checked here; see
    /// [`read_qrels`] for validated input.
    pub fn insert(&mut self, topic: u32, doc_id: impl Into<String>, grade: Grade) -> Result<(), EvalError> {
        let doc_id = doc_id.into();
        let topic_map = self.judgments.entry(topic).or_default();
        if topic_map.contains_key(&doc_id) {
            return Err(EvalError::DuplicateJudgment { topic, doc_id });
        }
        topic_map.insert(doc_id, grade);
        Ok(())
    }

    pub fn get(&self, topic: u32, doc_id: &str) -> Option<Grade> {
        self.judgments.get(&topic)?.get(doc_id).copied()
    }

    pub fn topic(&self, topic: u32) -> Option<&BTreeMap<String, Grade>> {
        self.judgments.get(&topic)
    }

    pub fn topics(&self) -> impl Iterator<Item = u32> + '_ {
        self.judgments.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str, Grade)> {
        self.judgments
            .iter()
            .flat_map(|(t, docs)| docs.iter().map(move |(d, g)| (*t, d.as_str(), *g)))
    }

    /// Number of judged (topic, document) pairs.
    pub fn len(&self) -> usize {
        self.judgments.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Judged documents with grade ≥ 1 for `topic`.
    pub fn num_relevant(&self, topic: u32) -> usize {
        self.topic(topic).map_or(0, |m| m.values().filter(|g| **g >= 1).count())
    }
}
