//! Best-first enumeration of minimal diagnoses.
//!
//! Both searches expand the same tree: a node is labelled with a minimal
//! conflict disjoint from its path (taken from the conflict store when
//! possible, computed otherwise) and gets one child per conflict element;
//! a node without such a conflict is a diagnosis.
//!
//! Costs are expressed as `(cost, cardinality)` keys. In probability order a
//! node's cost is `-ln` of the most optimistic prior product any extension of
//! its path can reach, which makes costs monotone along paths whatever the
//! priors are; a diagnosis is emitted at its exact `-ln p(D)`.

mod hstree;
mod rbfs;
mod sampling;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::dpi::{CompIdx, Dpi};
use crate::msmp::{quickxplain_min_conflict, Conflict, Diagnosis};
use crate::reasoner::ConsistencyChecker;

pub use hstree::{hstree, hstree_with};
pub use rbfs::{rbf_hs, rbf_hs_with};
pub use sampling::{
    best_of_random, best_of_random_with_stats, sample_diagnoses, CostModel, SampleError, SamplingStrategy,
    DEFAULT_RETRY_CAP_FACTOR,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SearchOrder {
    #[default]
    Cardinality,
    Probability,
}

impl std::str::FromStr for SearchOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cardinality" | "card" => Ok(Self::Cardinality),
            "probability" | "prob" => Ok(Self::Probability),
            other => Err(format!("unknown search order {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Budget {
    /// Stop once this many consistency checks have been spent.
    pub max_checks: Option<u64>,
    /// Stop once this many nodes have been processed.
    pub max_nodes: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SearchConfig {
    pub order: SearchOrder,
    /// Maximum number of diagnoses; `None` enumerates all.
    pub k: Option<usize>,
    pub budget: Budget,
}

impl SearchConfig {
    pub fn new(order: SearchOrder, k: Option<usize>) -> Self {
        Self {
            order,
            k,
            budget: Budget::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SearchStats {
    pub consistency_checks: u64,
    /// Checks that returned "consistent" for a node and so proved its path a diagnosis.
    pub verification_checks: u64,
    pub conflicts_computed: u64,
    pub conflicts_reused: u64,
    pub nodes_expanded: u64,
    pub nodes_closed_duplicate: u64,
    pub nodes_closed_superset: u64,
    pub peak_open_nodes: u64,
    pub max_depth: u64,
    pub max_conflict_size: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    /// The tree was exhausted: every minimal diagnosis was emitted.
    Complete,
    /// Stopped after emitting the requested number of diagnoses.
    LimitReached,
    /// Stopped by the budget; the result is a best-first prefix.
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub diagnoses: Vec<Diagnosis>,
    /// Minimal conflicts computed during the search, in computation order.
    pub conflicts: Vec<Conflict>,
    pub stats: SearchStats,
    pub status: SearchStatus,
}

impl SearchOutcome {
    pub fn exhausted(&self) -> bool {
        self.status == SearchStatus::BudgetExhausted
    }
}

/// Lexicographic `(cost, cardinality)` key.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Key {
    pub cost: f64,
    pub card: usize,
}

impl Key {
    pub const INFINITE: Key = Key {
        cost: f64::INFINITY,
        card: usize::MAX,
    };

    pub fn is_infinite(&self) -> bool {
        self.cost == f64::INFINITY
    }

    pub fn max(self, other: Key) -> Key {
        if self.cmp_key(&other) == Ordering::Less {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Key) -> Key {
        if self.cmp_key(&other) == Ordering::Greater {
            other
        } else {
            self
        }
    }

    pub fn cmp_key(&self, other: &Key) -> Ordering {
        self.cost.total_cmp(&other.cost).then(self.card.cmp(&other.card))
    }
}

/// Path costs for one search order.
#[derive(Debug, Clone)]
pub(crate) struct CostModelInternal {
    order: SearchOrder,
    /// Per component: cost added to the optimistic bound by assuming it faulty.
    bound_step: Vec<f64>,
    bound_base: f64,
    /// Per component: `-ln p_c + ln(1 - p_c)`.
    exact_step: Vec<f64>,
    exact_base: f64,
}

impl CostModelInternal {
    pub fn new(dpi: &Dpi, order: SearchOrder) -> Self {
        let p = dpi.priors();
        let best = |q: f64| q.max(1.0 - q);
        Self {
            order,
            bound_step: p.iter().map(|&q| -q.ln() + best(q).ln()).collect(),
            bound_base: p.iter().map(|&q| -best(q).ln()).sum(),
            exact_step: p.iter().map(|&q| -q.ln() + (1.0 - q).ln()).collect(),
            exact_base: p.iter().map(|&q| -(1.0 - q).ln()).sum(),
        }
    }

    /// Lower bound on the goal key of any diagnosis at or below `path`.
    pub fn node_key(&self, path: &[CompIdx]) -> Key {
        let cost = match self.order {
            SearchOrder::Cardinality => path.len() as f64,
            SearchOrder::Probability => self.bound_base + path.iter().map(|&c| self.bound_step[c]).sum::<f64>(),
        };
        Key { cost, card: path.len() }
    }

    pub fn goal_key(&self, path: &[CompIdx]) -> Key {
        let cost = match self.order {
            SearchOrder::Cardinality => path.len() as f64,
            SearchOrder::Probability => self.neg_log_prior(path),
        };
        Key { cost, card: path.len() }
    }

    /// `-ln p(D)` for the prior product of `path` as a diagnosis.
    pub fn neg_log_prior(&self, path: &[CompIdx]) -> f64 {
        self.exact_base + path.iter().map(|&c| self.exact_step[c]).sum::<f64>()
    }

    /// True if adding a fault can make a diagnosis more probable, in which
    /// case an emitted path is not automatically subset-minimal.
    pub fn supersets_can_win(&self) -> bool {
        self.order == SearchOrder::Probability && self.exact_step.iter().any(|&s| s <= 0.0)
    }
}

/// Prior product `p(D) = Π_{c∈D} p_c · Π_{c∉D} (1 − p_c)`.
pub fn prior_product(dpi: &Dpi, diagnosis: &[CompIdx]) -> f64 {
    (-CostModelInternal::new(dpi, SearchOrder::Probability).neg_log_prior(diagnosis)).exp()
}

/// Stored minimal conflicts, reused for any node whose path they avoid.
#[derive(Debug, Default, Clone)]
pub(crate) struct ConflictStore {
    conflicts: Vec<Vec<CompIdx>>,
}

impl ConflictStore {
    pub fn find_disjoint(&self, path: &[CompIdx]) -> Option<&[CompIdx]> {
        self.conflicts
            .iter()
            .find(|c| c.iter().all(|x| path.binary_search(x).is_err()))
            .map(|c| c.as_slice())
    }

    pub fn push(&mut self, c: Vec<CompIdx>) {
        self.conflicts.push(c);
    }

    pub fn to_conflicts(&self, dpi: &Dpi) -> Vec<Conflict> {
        self.conflicts.iter().map(|c| Conflict::from_indices(dpi, c)).collect()
    }
}

/// `sub ⊆ sup` for sorted index lists.
pub(crate) fn is_subset(sub: &[CompIdx], sup: &[CompIdx]) -> bool {
    sub.iter().all(|x| sup.binary_search(x).is_ok())
}

pub(crate) fn extend_path(path: &[CompIdx], c: CompIdx) -> Vec<CompIdx> {
    let mut p = Vec::with_capacity(path.len() + 1);
    let pos = path.binary_search(&c).unwrap_err();
    p.extend_from_slice(&path[..pos]);
    p.push(c);
    p.extend_from_slice(&path[pos..]);
    p
}

pub(crate) fn complement(n: usize, path: &[CompIdx]) -> Vec<CompIdx> {
    (0..n).filter(|c| path.binary_search(c).is_err()).collect()
}

pub(crate) fn scored(dpi: &Dpi, costs: &CostModelInternal, path: &[CompIdx]) -> Diagnosis {
    let mut d = Diagnosis::from_indices(dpi, path);
    d.prob = (-costs.neg_log_prior(path)).exp();
    d
}

/// Result of labelling a node.
pub(crate) enum Label {
    Diagnosis,
    Conflict(Vec<CompIdx>),
}

/// Labels `path`: reuses a stored conflict disjoint from it or runs
/// QuickXplain on the complement. Updates check and conflict counters.
pub(crate) fn label_node<R: ConsistencyChecker + ?Sized>(
    checker: &mut R,
    store: &mut ConflictStore,
    stats: &mut SearchStats,
    n: usize,
    path: &[CompIdx],
) -> Label {
    if let Some(c) = store.find_disjoint(path) {
        stats.conflicts_reused += 1;
        return Label::Conflict(c.to_vec());
    }
    let before = checker.stats().consistency_checks;
    match quickxplain_min_conflict(checker, &complement(n, path)) {
        Some(c) => {
            stats.conflicts_computed += 1;
            stats.max_conflict_size = stats.max_conflict_size.max(c.len() as u64);
            store.push(c.clone());
            Label::Conflict(c)
        }
        None => {
            stats.verification_checks += checker.stats().consistency_checks - before;
            Label::Diagnosis
        }
    }
}

pub(crate) fn budget_spent(budget: &Budget, checks: u64, nodes: u64) -> bool {
    budget.max_checks.is_some_and(|m| checks >= m) || budget.max_nodes.is_some_and(|m| nodes >= m)
}
