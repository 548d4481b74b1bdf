use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::rrf::{rrf_fuse, RrfParams};
use super::FusionError;
use crate::eval::{mean_metric, EvalMetric, Qrels};
use crate::run::Run;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SoboroffParams {
    /// Per-run depth of the judging pool.
    pub pool_depth: usize,
    /// Share of each topic's pool drawn as pseudo-relevant, in (0, 1].
    pub sample_fraction: f64,
    pub trials: usize,
    pub select_middle: usize,
    pub seed: u64,
}

impl Default for SoboroffParams {
    fn default() -> Self {
        Self {
            pool_depth: 100,
            sample_fraction: 0.1,
            trials: 50,
            select_middle: 9,
            seed: 0,
        }
    }
}

impl SoboroffParams {
    pub fn validate(&self, candidates: usize) -> Result<(), FusionError> {
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return Err(FusionError::InvalidFraction(self.sample_fraction));
        }
        if self.pool_depth == 0 || self.trials == 0 || self.select_middle == 0 {
            return Err(FusionError::InvalidParams(
                "pool_depth, trials and select_middle must be >= 1".into(),
            ));
        }
        if candidates < self.select_middle {
            return Err(FusionError::TooFewRuns {
                needed: self.select_middle,
                found: candidates,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoboroffSelection {
    /// Candidate indices, best mean rank first. Ties keep input order.
    pub order: Vec<usize>,
    /// Mean rank of each candidate (indexed like the input), 1 = best.
    pub mean_ranks: Vec<f64>,
    /// The chosen window of `order`, in the same order.
    pub selected: Vec<usize>,
}

/// Random pseudo-qrels for one trial: per topic, the union of every
/// candidate's top `pool_depth` documents, a uniform sample of which is
/// marked relevant and the rest non-relevant.
fn pseudo_qrels(candidates: &[Run], p: &SoboroffParams, rng: &mut ChaCha8Rng) -> Qrels {
    let topics: BTreeSet<u32> = candidates.iter().flat_map(Run::topics).collect();
    let mut qrels = Qrels::new();
    for topic in topics {
        let pool: BTreeSet<&str> = candidates
            .iter()
            .flat_map(|r| r.entries(topic).iter().filter(|e| e.rank <= p.pool_depth))
            .map(|e| e.surrogate_id.as_str())
            .collect();
        let pool: Vec<&str> = pool.into_iter().collect();
        let m = (p.sample_fraction * pool.len() as f64).ceil() as usize;
        let chosen: BTreeSet<usize> = sample(rng, pool.len(), m.min(pool.len())).into_iter().collect();
        for (i, doc) in pool.into_iter().enumerate() {
            qrels
                .insert(topic, doc, u8::from(chosen.contains(&i)))
                .expect("pool entries are unique");
        }
    }
    qrels
}

/// Ranks candidate runs against random pseudo-qrels, averages each run's
/// rank over `trials`, and returns the `select_middle` runs centred on the
/// median position. Trial `t` draws from a ChaCha8 stream `t` seeded with
/// `seed`, so the selection depends only on the inputs.
pub fn soboroff_select(
    candidates: &[Run],
    p: &SoboroffParams,
    metric: EvalMetric,
) -> Result<SoboroffSelection, FusionError> {
    p.validate(candidates.len())?;
    let n = candidates.len();
    let mut rank_sums = vec![0usize; n];
    for trial in 0..p.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        rng.set_stream(trial as u64);
        let qrels = pseudo_qrels(candidates, p, &mut rng);
        let scores: Vec<f64> = candidates.iter().map(|r| mean_metric(r, &qrels, metric)).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        for (pos, &i) in order.iter().enumerate() {
            rank_sums[i] += pos + 1;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| rank_sums[i]);
    let start = (n - p.select_middle) / 2;
    let selected = order[start..start + p.select_middle].to_vec();
    Ok(SoboroffSelection {
        mean_ranks: rank_sums.iter().map(|&s| s as f64 / p.trials as f64).collect(),
        order,
        selected,
    })
}

/// Fuses the Soboroff-selected external runs with the team's own runs.
pub fn soboroff_filtering(
    external: &[Run],
    own: &[Run],
    sp: &SoboroffParams,
    metric: EvalMetric,
    rp: &RrfParams,
    tag: &str,
) -> Result<Run, FusionError> {
    let selection = soboroff_select(external, sp, metric)?;
    rrf_fuse(selection.selected.iter().map(|&i| &external[i]).chain(own), rp, tag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::run::{Scored, MAX_RESULTS};

    /// Run `i` ranks `depth` consecutive ids starting at `13 i + t`, on two
    /// topics.
    fn candidates(n: usize, depth: usize) -> Vec<Run> {
        (0..n)
            .map(|i| {
                let mut r = Run::new(format!("c{i:02}"));
                for t in [1usize, 2] {
                    let docs = (0..depth)
                        .map(|j| {
                            let id = format!("d{:04}", (j + 13 * i + t) % 1000);
                            Scored::new(id.clone(), id, (depth - j) as f64)
                        })
                        .collect();
                    r.insert_scored(t as u32, docs, MAX_RESULTS);
                }
                r
            })
            .collect()
    }

    #[test]
    fn middle_window_of_27() {
        let c = candidates(27, 120);
        let p = SoboroffParams { trials: 10, ..Default::default() };
        let s = soboroff_select(&c, &p, EvalMetric::Map).unwrap();
        assert_eq!(s.selected.len(), 9);
        assert_eq!(s.selected, s.order[9..18]);
        let top: BTreeSet<usize> = s.order[..9].iter().copied().collect();
        let bottom: BTreeSet<usize> = s.order[18..].iter().copied().collect();
        assert!(s.selected.iter().all(|i| !top.contains(i) && !bottom.contains(i)));
        assert_eq!(soboroff_select(&c, &p, EvalMetric::Map).unwrap(), s);
    }

    #[test]
    fn full_sampling_ties_fall_back_to_input_order() {
        let c = candidates(12, 120);
        let p = SoboroffParams {
            trials: 1,
            sample_fraction: 1.0,
            pool_depth: 100,
            select_middle: 4,
            seed: 3,
        };
        let s = soboroff_select(&c, &p, EvalMetric::PrecisionAt(100)).unwrap();
        assert_eq!(s.order, (0..12).collect::<Vec<_>>());
        assert_eq!(s.selected, [4, 5, 6, 7]);
    }

    #[test]
    fn seed_changes_draws() {
        let c = candidates(5, 50);
        let p = SoboroffParams { select_middle: 1, sample_fraction: 0.3, ..Default::default() };
        let mut a = ChaCha8Rng::seed_from_u64(1);
        let mut b = ChaCha8Rng::seed_from_u64(2);
        assert_ne!(pseudo_qrels(&c, &p, &mut a), pseudo_qrels(&c, &p, &mut b));
        let q = pseudo_qrels(&c, &p, &mut ChaCha8Rng::seed_from_u64(1));
        // ⌈0.3 · |pool|⌉ pseudo-relevant per topic
        for t in [1, 2] {
            let judged = q.topic(t).unwrap();
            assert_eq!(q.num_relevant(t), (0.3 * judged.len() as f64).ceil() as usize);
        }
    }

    #[test]
    fn errors() {
        let c = candidates(5, 10);
        let p = SoboroffParams::default();
        assert_eq!(
            soboroff_select(&c, &p, EvalMetric::Map).unwrap_err(),
            FusionError::TooFewRuns { needed: 9, found: 5 }
        );
        for f in [0.0, 1.5, f64::NAN] {
            let p = SoboroffParams { sample_fraction: f, select_middle: 2, ..Default::default() };
            assert!(matches!(soboroff_select(&c, &p, EvalMetric::Map), Err(FusionError::InvalidFraction(_))));
        }
    }

    #[test]
    fn filtering_fuses_selection_and_own() {
        let c = candidates(10, 30);
        let p = SoboroffParams { select_middle: 3, trials: 4, ..Default::default() };
        let own = candidates(2, 5);
        let sel = soboroff_select(&c, &p, EvalMetric::Map).unwrap();
        let picked: Vec<&Run> = sel.selected.iter().map(|&i| &c[i]).chain(&own).collect();
        let want = rrf_fuse(picked, &RrfParams::default(), "sf").unwrap();
        let got = soboroff_filtering(&c, &own, &p, EvalMetric::Map, &RrfParams::default(), "sf").unwrap();
        assert_eq!(got, want);
    }
}
