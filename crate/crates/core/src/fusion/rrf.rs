use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::FusionError;
use crate::run::{Run, Scored, MAX_RESULTS};

/// Number of query variations, and of run configurations per variation.
pub const RUN_GROUPS: usize = 4;
pub const RUNS_PER_GROUP: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RrfParams {
    pub k: f64,
}

impl Default for RrfParams {
    fn default() -> Self {
        Self { k: 60.0 }
    }
}

impl RrfParams {
    pub fn validate(&self) -> Result<(), FusionError> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(FusionError::InvalidParams(format!("k must be > 0, got {}", self.k)));
        }
        Ok(())
    }
}

/// Reciprocal rank fusion: each document scores Σ 1/(k + rank) over the
/// runs that retrieve it.
///
/// Documents are keyed by original id, so paragraph-level runs contribute
/// the best rank of any of a document's paragraphs. Output ids are original
/// ids, ordered by descending fused score with ties on descending id, and
/// capped at 1000 per topic. Scores are the raw sums.
pub fn rrf_fuse<'a>(
    runs: impl IntoIterator<Item = &'a Run>,
    p: &RrfParams,
    tag: &str,
) -> Result<Run, FusionError> {
    p.validate()?;
    let runs: Vec<&Run> = runs.into_iter().collect();
    let first = runs.first().ok_or(FusionError::EmptyRunList)?;
    let topics: BTreeSet<u32> = first.topics().collect();
    for run in &runs[1..] {
        let found: BTreeSet<u32> = run.topics().collect();
        if found != topics {
            return Err(FusionError::TopicSetMismatch {
                run: run.tag().to_string(),
                expected: topics.into_iter().collect(),
                found: found.into_iter().collect(),
            });
        }
    }
    let mut out = Run::new(tag);
    for &topic in &topics {
        let mut ranks: HashMap<&str, Vec<usize>> = HashMap::new();
        for run in &runs {
            let mut best: HashMap<&str, usize> = HashMap::new();
            for e in run.entries(topic) {
                let r = best.entry(e.original_id.as_str()).or_insert(e.rank);
                *r = (*r).min(e.rank);
            }
            for (id, r) in best {
                ranks.entry(id).or_default().push(r);
            }
        }
        let docs = ranks
            .into_iter()
            .map(|(id, mut rs)| {
                // fixed summation order keeps the sums independent of run order
                rs.sort_unstable();
                let score = rs.iter().map(|&r| 1.0 / (p.k + r as f64)).sum();
                Scored::new(id, id, score)
            })
            .collect();
        out.insert_scored(topic, docs, MAX_RESULTS);
    }
    Ok(out)
}

/// One fusion over all sixteen runs.
pub fn fusion_of_runs(runs: &[Run], p: &RrfParams, tag: &str) -> Result<Run, FusionError> {
    let expected = RUN_GROUPS * RUNS_PER_GROUP;
    if runs.len() != expected {
        return Err(FusionError::WrongRunCount {
            expected,
            found: runs.len(),
        });
    }
    rrf_fuse(runs, p, tag)
}

/// Fuses each group of four runs, then fuses the four results.
pub fn fusion_of_fusions(groups: &[Vec<Run>], p: &RrfParams, tag: &str) -> Result<Run, FusionError> {
    if groups.len() != RUN_GROUPS || groups.iter().any(|g| g.len() != RUNS_PER_GROUP) {
        return Err(FusionError::WrongGroupShape {
            groups: RUN_GROUPS,
            per_group: RUNS_PER_GROUP,
            found: groups.iter().map(Vec::len).collect(),
        });
    }
    let stage1 = groups
        .iter()
        .enumerate()
        .map(|(i, g)| rrf_fuse(g, p, &format!("{tag}.{}", i + 1)))
        .collect::<Result<Vec<_>, _>>()?;
    rrf_fuse(&stage1, p, tag)
}

/// Fuses every external run together with the team's own runs. Nothing is
/// deduplicated: a run passed twice counts twice.
pub fn all_filtering(external: &[Run], own: &[Run], p: &RrfParams, tag: &str) -> Result<Run, FusionError> {
    rrf_fuse(external.iter().chain(own), p, tag)
}
