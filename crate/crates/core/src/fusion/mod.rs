//! Reciprocal rank fusion and the run-combination strategies built on it.

mod rrf;
mod soboroff;

use thiserror::Error;

pub use rrf::{all_filtering, fusion_of_fusions, fusion_of_runs, rrf_fuse, RrfParams, RUNS_PER_GROUP, RUN_GROUPS};
pub use soboroff::{soboroff_filtering, soboroff_select, SoboroffParams, SoboroffSelection};

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("no runs to fuse")]
    EmptyRunList,
    #[error("run `{run}` covers topics {found:?}, expected {expected:?}")]
    TopicSetMismatch {
        run: String,
        expected: Vec<u32>,
        found: Vec<u32>,
    },
    #[error("expected {expected} runs, got {found}")]
    WrongRunCount { expected: usize, found: usize },
    #[error("expected {groups} groups of {per_group} runs, got group sizes {found:?}")]
    WrongGroupShape {
        groups: usize,
        per_group: usize,
        found: Vec<usize>,
    },
    #[error("need at least {needed} candidate runs, got {found}")]
    TooFewRuns { needed: usize, found: usize },
    #[error("sample fraction must be in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}
