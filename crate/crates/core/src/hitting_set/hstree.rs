//! Uniform-cost HS-Tree over a single priority queue.
//!
//! Nodes and verified diagnoses ("goals") share the queue. A goal is emitted
//! when it is popped, so output is in non-decreasing goal key; at equal key a
//! goal pops before a node (so the first diagnosis costs as few conflicts as
//! possible) and goals waiting together pop smallest, then lexicographically
//! first. Nodes of equal key pop in FIFO order.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use super::{
    budget_spent, extend_path, label_node, scored, ConflictStore, CostModelInternal, Key, Label, SearchConfig,
    SearchOutcome, SearchStats, SearchStatus,
};
use crate::dpi::{CompIdx, Dpi};
use crate::reasoner::{ConsistencyChecker, DpllReasoner};

#[derive(Debug)]
enum Kind {
    Goal,
    Node { seq: u64 },
}

#[derive(Debug)]
struct Entry {
    key: Key,
    kind: Kind,
    path: Vec<CompIdx>,
}

impl Entry {
    /// Ascending priority: smaller means popped earlier.
    fn priority_cmp(&self, other: &Self) -> Ordering {
        self.key.cost.total_cmp(&other.key.cost).then_with(|| match (&self.kind, &other.kind) {
            (Kind::Goal, Kind::Node { .. }) => Ordering::Less,
            (Kind::Node { .. }, Kind::Goal) => Ordering::Greater,
            (Kind::Goal, Kind::Goal) => self.key.card.cmp(&other.key.card).then_with(|| self.path.cmp(&other.path)),
            (Kind::Node { seq: a }, Kind::Node { seq: b }) => self.key.card.cmp(&other.key.card).then(a.cmp(b)),
        })
    }
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.priority_cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap.
        other.priority_cmp(self)
    }
}

/// HS-Tree with a fresh DPLL reasoner.
pub fn hstree(dpi: &Dpi, cfg: &SearchConfig) -> SearchOutcome {
    hstree_with(dpi, &mut DpllReasoner::new(dpi), cfg)
}

/// HS-Tree using the given checker. `stats.consistency_checks` counts only
/// checks issued by this call.
pub fn hstree_with<R: ConsistencyChecker + ?Sized>(dpi: &Dpi, checker: &mut R, cfg: &SearchConfig) -> SearchOutcome {
    let n = dpi.num_components();
    let costs = CostModelInternal::new(dpi, cfg.order);
    let start_checks = checker.stats().consistency_checks;
    let mut stats = SearchStats::default();
    let mut store = ConflictStore::default();
    let mut heap = BinaryHeap::new();
    let mut generated: HashSet<Vec<CompIdx>> = HashSet::new();
    let mut found: Vec<Vec<CompIdx>> = Vec::new();
    let mut out = Vec::new();
    let mut seq = 0u64;
    let mut processed = 0u64;

    generated.insert(Vec::new());
    heap.push(Entry {
        key: costs.node_key(&[]),
        kind: Kind::Node { seq },
        path: Vec::new(),
    });
    stats.peak_open_nodes = 1;

    let mut status = SearchStatus::Complete;
    if cfg.k == Some(0) {
        status = SearchStatus::LimitReached;
        heap.clear();
    }

    while let Some(entry) = heap.pop() {
        match entry.kind {
            Kind::Goal => {
                out.push(scored(dpi, &costs, &entry.path));
                if cfg.k.is_some_and(|k| out.len() >= k) {
                    status = SearchStatus::LimitReached;
                    break;
                }
            }
            Kind::Node { .. } => {
                let path = entry.path;
                if found.iter().any(|d| super::is_subset(d, &path)) {
                    stats.nodes_closed_superset += 1;
                    continue;
                }
                let spent = checker.stats().consistency_checks - start_checks;
                if budget_spent(&cfg.budget, spent, processed) {
                    status = SearchStatus::BudgetExhausted;
                    break;
                }
                processed += 1;
                stats.max_depth = stats.max_depth.max(path.len() as u64);
                match label_node(checker, &mut store, &mut stats, n, &path) {
                    Label::Diagnosis => {
                        found.push(path.clone());
                        heap.push(Entry {
                            key: costs.goal_key(&path),
                            kind: Kind::Goal,
                            path,
                        });
                    }
                    Label::Conflict(conflict) => {
                        stats.nodes_expanded += 1;
                        for c in conflict {
                            let child = extend_path(&path, c);
                            if !generated.insert(child.clone()) {
                                stats.nodes_closed_duplicate += 1;
                                continue;
                            }
                            seq += 1;
                            heap.push(Entry {
                                key: costs.node_key(&child),
                                kind: Kind::Node { seq },
                                path: child,
                            });
                        }
                    }
                }
                stats.peak_open_nodes = stats.peak_open_nodes.max(heap.len() as u64);
            }
        }
    }

    stats.consistency_checks = checker.stats().consistency_checks - start_checks;
    SearchOutcome {
        diagnoses: out,
        conflicts: store.to_conflicts(dpi),
        stats,
        status,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::full_adder;
    use crate::hitting_set::{Budget, SearchOrder};
    use crate::msmp::Diagnosis;

    fn names(out: &SearchOutcome) -> Vec<String> {
        out.diagnoses.iter().map(|d| d.to_string()).collect()
    }

    #[test]
    fn full_adder_all_by_cardinality() {
        let out = hstree(&full_adder(), &SearchConfig::new(SearchOrder::Cardinality, None));
        let mut got = names(&out);
        assert_eq!(got[0], "[X1]");
        got[1..].sort();
        assert_eq!(got, ["[X1]", "[A2,X2]", "[O1,X2]"]);
        assert_eq!(out.status, SearchStatus::Complete);
        assert_eq!(out.stats.conflicts_computed, 2);
        assert_eq!(out.stats.conflicts_reused, 1);
        assert_eq!(out.stats.verification_checks, 3);
        assert_eq!(out.stats.consistency_checks, 16);
    }

    #[test]
    fn first_diagnosis_needs_one_conflict() {
        let out = hstree(&full_adder(), &SearchConfig::new(SearchOrder::Cardinality, Some(1)));
        assert_eq!(out.diagnoses, vec![Diagnosis::from_strs(&["X1"])]);
        assert_eq!(out.stats.conflicts_computed, 1);
        assert_eq!(out.status, SearchStatus::LimitReached);
    }

    #[test]
    fn probability_order_prefers_likely_or_gate() {
        let dpi = full_adder();
        let mut priors = dpi.prior_map();
        priors.insert("O1".parse().unwrap(), 0.6);
        let dpi = dpi.with_priors(&priors).unwrap();
        let out = hstree(&dpi, &SearchConfig::new(SearchOrder::Probability, Some(1)));
        assert_eq!(names(&out), ["[O1,X2]"]);
        let all = hstree(&dpi, &SearchConfig::new(SearchOrder::Probability, None));
        assert_eq!(names(&all), ["[O1,X2]", "[X1]", "[A2,X2]"]);
        let probs: Vec<f64> = all.diagnoses.iter().map(|d| d.prob).collect();
        assert!(probs.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn budget_returns_prefix() {
        let cfg = SearchConfig {
            order: SearchOrder::Cardinality,
            k: None,
            budget: Budget {
                max_checks: Some(9),
                max_nodes: None,
            },
        };
        let out = hstree(&full_adder(), &cfg);
        assert!(out.exhausted());
        assert!(out.diagnoses.len() < 3);
    }
}
