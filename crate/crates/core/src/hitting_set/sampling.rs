//! Diagnosis sampling: best-first, worst-first and randomized.
//!
//! A random draw runs the inverse QuickXplain on a shuffled component order.
//! Draw `i` of seed `s` always uses ChaCha8 seeded with `s` on stream `i`, so
//! draws are reproducible individually and independent of how they are
//! scheduled across threads.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{hstree, prior_product, SearchConfig, SearchOrder};
use crate::dpi::{CompIdx, ComponentId, Dpi, DpiError};
use crate::msmp::{invqx_min_diagnosis, Diagnosis};
use crate::reasoner::{ConsistencyChecker, DpllReasoner, SolverStats};

/// Random sampling gives up after `DEFAULT_RETRY_CAP_FACTOR * k` draws
/// (at least this many) unless a cap is given.
pub const DEFAULT_RETRY_CAP_FACTOR: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingStrategy {
    BestFirst,
    WorstFirst,
    Random,
}

impl std::str::FromStr for SamplingStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "best" | "best_first" | "best-first" => Ok(Self::BestFirst),
            "worst" | "worst_first" | "worst-first" => Ok(Self::WorstFirst),
            "random" => Ok(Self::Random),
            other => Err(format!("unknown sampling strategy {other:?}")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("retry cap of {cap} draws reached with {} distinct diagnoses", found.len())]
    RetryCapExceeded { cap: usize, found: Vec<Diagnosis> },
    #[error("no diagnosis exists for this instance")]
    NoDiagnosis,
    #[error(transparent)]
    Dpi(#[from] DpiError),
}

/// Up to `k` distinct diagnoses, each carrying its prior product as `prob`.
///
/// Best-first returns the `k` most probable minimal diagnoses. Worst-first
/// searches with every prior replaced by its complement, which reverses the
/// ranking of prior products, and returns the `k` least probable ones.
/// Random returns `k` distinct random minimal diagnoses or fails with the set
/// found once `retry_cap` draws (default `max(20k, 20)`) have been spent.
pub fn sample_diagnoses(
    dpi: &Dpi,
    strategy: SamplingStrategy,
    k: usize,
    seed: u64,
    retry_cap: Option<usize>,
) -> Result<Vec<Diagnosis>, SampleError> {
    match strategy {
        SamplingStrategy::BestFirst => Ok(hstree(dpi, &SearchConfig::new(SearchOrder::Probability, Some(k))).diagnoses),
        SamplingStrategy::WorstFirst => {
            let flipped: BTreeMap<ComponentId, f64> = dpi.prior_map().into_iter().map(|(c, p)| (c, 1.0 - p)).collect();
            let inverted = dpi.with_priors(&flipped)?;
            let mut out = hstree(&inverted, &SearchConfig::new(SearchOrder::Probability, Some(k))).diagnoses;
            for d in &mut out {
                d.prob = prior_product(dpi, &d.indices(dpi));
            }
            Ok(out)
        }
        SamplingStrategy::Random => {
            let cap = retry_cap.unwrap_or_else(|| (DEFAULT_RETRY_CAP_FACTOR * k).max(DEFAULT_RETRY_CAP_FACTOR));
            let mut reasoner = DpllReasoner::new(dpi);
            let mut seen = HashSet::new();
            let mut out = Vec::new();
            for run in 0..cap {
                if out.len() >= k {
                    break;
                }
                let Some(d) = random_draw(dpi, &mut reasoner, seed, run as u64) else {
                    return Err(SampleError::NoDiagnosis);
                };
                if seen.insert(d.clone()) {
                    out.push(d);
                }
            }
            if out.len() < k {
                return Err(SampleError::RetryCapExceeded { cap, found: out });
            }
            Ok(out)
        }
    }
}

fn random_draw<R: ConsistencyChecker + ?Sized>(dpi: &Dpi, checker: &mut R, seed: u64, run: u64) -> Option<Diagnosis> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    let mut order: Vec<CompIdx> = (0..dpi.num_components()).collect();
    order.shuffle(&mut rng);
    let found = invqx_min_diagnosis(checker, dpi.num_components(), &order)?;
    let mut d = Diagnosis::from_indices(dpi, &found);
    d.prob = prior_product(dpi, &found);
    Some(d)
}

/// How `best_of_random` ranks candidates (lower is better).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CostModel {
    #[default]
    Cardinality,
    NegLogProb,
    /// Sum of per-component weights; missing components weigh 1.
    Weights(BTreeMap<ComponentId, f64>),
}

impl CostModel {
    pub fn cost(&self, dpi: &Dpi, d: &Diagnosis) -> f64 {
        match self {
            CostModel::Cardinality => d.len() as f64,
            CostModel::NegLogProb => -prior_product(dpi, &d.indices(dpi)).ln(),
            CostModel::Weights(w) => d.comps.iter().map(|c| w.get(c).copied().unwrap_or(1.0)).sum(),
        }
    }
}

/// Cheapest of `n_samples` random diagnoses, ties broken by cardinality and
/// then lexicographically. Returns `None` if no diagnosis exists or
/// `n_samples` is zero. The result does not depend on `parallelism`.
pub fn best_of_random(dpi: &Dpi, cost: &CostModel, n_samples: usize, seed: u64, parallelism: usize) -> Option<Diagnosis> {
    best_of_random_with_stats(dpi, cost, n_samples, seed, parallelism).0
}

/// As [`best_of_random`], also returning the summed reasoner statistics.
pub fn best_of_random_with_stats(
    dpi: &Dpi,
    cost: &CostModel,
    n_samples: usize,
    seed: u64,
    parallelism: usize,
) -> (Option<Diagnosis>, SolverStats) {
    let workers = parallelism.clamp(1, n_samples.max(1));
    let results: Vec<(Option<(f64, Diagnosis)>, SolverStats)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                scope.spawn(move || {
                    let mut reasoner = DpllReasoner::new(dpi);
                    let mut best: Option<(f64, Diagnosis)> = None;
                    for run in (w..n_samples).step_by(workers) {
                        if let Some(d) = random_draw(dpi, &mut reasoner, seed, run as u64) {
                            let c = cost.cost(dpi, &d);
                            if best.as_ref().is_none_or(|b| better(c, &d, b)) {
                                best = Some((c, d));
                            }
                        }
                    }
                    (best, reasoner.stats())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sampling worker panicked")).collect()
    });
    let mut stats = SolverStats::default();
    let mut best: Option<(f64, Diagnosis)> = None;
    for (candidate, s) in results {
        stats.consistency_checks += s.consistency_checks;
        stats.propagations += s.propagations;
        stats.decisions += s.decisions;
        if let Some((c, d)) = candidate {
            if best.as_ref().is_none_or(|b| better(c, &d, b)) {
                best = Some((c, d));
            }
        }
    }
    (best.map(|(_, d)| d), stats)
}

fn better(cost: f64, d: &Diagnosis, incumbent: &(f64, Diagnosis)) -> bool {
    cost.total_cmp(&incumbent.0).then_with(|| d.cmp(&incumbent.1)).is_lt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::full_adder;

    fn with_o1(p: f64) -> Dpi {
        let dpi = full_adder();
        let mut priors = dpi.prior_map();
        priors.insert("O1".parse().unwrap(), p);
        dpi.with_priors(&priors).unwrap()
    }

    #[test]
    fn best_and_worst_first() {
        let dpi = with_o1(0.6);
        let best = sample_diagnoses(&dpi, SamplingStrategy::BestFirst, 1, 0, None).unwrap();
        assert_eq!(best, vec![Diagnosis::from_strs(&["O1", "X2"])]);
        let worst = sample_diagnoses(&dpi, SamplingStrategy::WorstFirst, 1, 0, None).unwrap();
        assert_eq!(worst, vec![Diagnosis::from_strs(&["A2", "X2"])]);
        assert!(worst[0].prob < best[0].prob);
    }

    #[test]
    fn random_is_reproducible_and_distinct() {
        let dpi = full_adder();
        let a = sample_diagnoses(&dpi, SamplingStrategy::Random, 3, 7, None).unwrap();
        let b = sample_diagnoses(&dpi, SamplingStrategy::Random, 3, 7, None).unwrap();
        assert_eq!(a, b);
        let set: HashSet<_> = a.iter().cloned().collect();
        assert_eq!(set.len(), 3);
    }

    #[test]
    fn retry_cap_returns_partial_set() {
        let err = sample_diagnoses(&full_adder(), SamplingStrategy::Random, 4, 1, Some(30)).unwrap_err();
        match err {
            SampleError::RetryCapExceeded { cap, found } => {
                assert_eq!(cap, 30);
                assert_eq!(found.len(), 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn best_of_random_independent_of_threads() {
        let dpi = full_adder();
        let one = best_of_random(&dpi, &CostModel::Cardinality, 40, 3, 1);
        let four = best_of_random(&dpi, &CostModel::Cardinality, 40, 3, 4);
        assert_eq!(one, four);
        assert_eq!(one, Some(Diagnosis::from_strs(&["X1"])));
        let single = best_of_random(&dpi, &CostModel::Cardinality, 1, 3, 1).unwrap();
        let drawn = sample_diagnoses(&dpi, SamplingStrategy::Random, 1, 3, None).unwrap();
        assert_eq!(vec![single], drawn);
    }

    #[test]
    fn weighted_cost() {
        let dpi = full_adder();
        let weights: BTreeMap<ComponentId, f64> = [("X1".parse().unwrap(), 10.0)].into_iter().collect();
        let best = best_of_random(&dpi, &CostModel::Weights(weights), 60, 0, 2).unwrap();
        assert_eq!(best.len(), 2);
    }
}
