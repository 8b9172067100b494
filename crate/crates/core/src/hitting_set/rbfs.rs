//! Linear-space best-first enumeration via recursive best-first search.
//!
//! Only the children of the nodes on the current recursion path are held in
//! memory, each with a backed-up key. A subtree whose best key exceeds the
//! best alternative is forgotten and regenerated later; the conflict store
//! keeps regeneration cheap. Emitted diagnoses, and any path containing one,
//! are dead.

use std::collections::HashSet;

use super::{
    budget_spent, complement, extend_path, is_subset, label_node, scored, ConflictStore, CostModelInternal, Key,
    Label, SearchConfig, SearchOutcome, SearchStats, SearchStatus,
};
use crate::dpi::{CompIdx, Dpi};
use crate::msmp::Diagnosis;
use crate::reasoner::{ConsistencyChecker, DpllReasoner};

/// RBF-HS with a fresh DPLL reasoner.
pub fn rbf_hs(dpi: &Dpi, cfg: &SearchConfig) -> SearchOutcome {
    rbf_hs_with(dpi, &mut DpllReasoner::new(dpi), cfg)
}

pub fn rbf_hs_with<R: ConsistencyChecker + ?Sized>(dpi: &Dpi, checker: &mut R, cfg: &SearchConfig) -> SearchOutcome {
    let costs = CostModelInternal::new(dpi, cfg.order);
    let start_checks = checker.stats().consistency_checks;
    let mut search = Rbfs {
        dpi,
        n: dpi.num_components(),
        checker,
        cfg,
        check_minimality: costs.supersets_can_win(),
        costs,
        start_checks,
        store: ConflictStore::default(),
        verified: HashSet::new(),
        emitted: Vec::new(),
        out: Vec::new(),
        stats: SearchStats::default(),
        open_now: 0,
        processed: 0,
        status: None,
    };
    if cfg.k == Some(0) {
        search.status = Some(SearchStatus::LimitReached);
    } else {
        let root_key = search.costs.node_key(&[]);
        search.stats.peak_open_nodes = 1;
        search.visit(&[], root_key, Key::INFINITE);
    }
    let mut stats = search.stats;
    stats.consistency_checks = search.checker.stats().consistency_checks - start_checks;
    SearchOutcome {
        diagnoses: search.out,
        conflicts: search.store.to_conflicts(dpi),
        stats,
        status: search.status.unwrap_or(SearchStatus::Complete),
    }
}

struct Rbfs<'a, R: ?Sized> {
    dpi: &'a Dpi,
    n: usize,
    checker: &'a mut R,
    cfg: &'a SearchConfig,
    costs: CostModelInternal,
    check_minimality: bool,
    start_checks: u64,
    store: ConflictStore,
    /// Paths already proven to be diagnoses, so revisits cost no checks.
    verified: HashSet<Vec<CompIdx>>,
    emitted: Vec<Vec<CompIdx>>,
    out: Vec<Diagnosis>,
    stats: SearchStats,
    /// Children held across the recursion path.
    open_now: u64,
    processed: u64,
    status: Option<SearchStatus>,
}

struct Child {
    path: Vec<CompIdx>,
    key: Key,
}

impl<R: ConsistencyChecker + ?Sized> Rbfs<'_, R> {
    /// Explores below `path`, whose backed-up key is `stored`, while its best
    /// frontier key stays within `bound`. Returns the new backed-up key.
    fn visit(&mut self, path: &[CompIdx], stored: Key, bound: Key) -> Key {
        if self.status.is_some() {
            return Key::INFINITE;
        }
        if self.emitted.iter().any(|d| is_subset(d, path)) {
            self.stats.nodes_closed_superset += 1;
            return Key::INFINITE;
        }
        let is_diagnosis = if self.verified.contains(path) {
            true
        } else {
            let spent = self.checker.stats().consistency_checks - self.start_checks;
            if budget_spent(&self.cfg.budget, spent, self.processed) {
                self.status = Some(SearchStatus::BudgetExhausted);
                return Key::INFINITE;
            }
            self.processed += 1;
            self.stats.max_depth = self.stats.max_depth.max(path.len() as u64);
            match label_node(&mut *self.checker, &mut self.store, &mut self.stats, self.n, path) {
                Label::Diagnosis => {
                    self.verified.insert(path.to_vec());
                    true
                }
                Label::Conflict(conflict) => return self.expand(path, stored, bound, conflict),
            }
        };
        debug_assert!(is_diagnosis);
        let goal = self.costs.goal_key(path);
        if goal.cmp_key(&bound).is_gt() {
            return goal;
        }
        if self.check_minimality && !self.is_minimal(path) {
            return Key::INFINITE;
        }
        self.emitted.push(path.to_vec());
        self.out.push(scored(self.dpi, &self.costs, path));
        if self.cfg.k.is_some_and(|k| self.out.len() >= k) {
            self.status = Some(SearchStatus::LimitReached);
        }
        Key::INFINITE
    }

    fn expand(&mut self, path: &[CompIdx], stored: Key, bound: Key, conflict: Vec<CompIdx>) -> Key {
        self.stats.nodes_expanded += 1;
        let own = self.costs.node_key(path);
        let inherited = stored.cmp_key(&own).is_gt();
        let mut children: Vec<Child> = conflict
            .into_iter()
            .map(|c| {
                let child = extend_path(path, c);
                let mut key = self.costs.node_key(&child);
                if inherited {
                    key = key.max(stored);
                }
                Child { path: child, key }
            })
            .collect();
        if children.is_empty() {
            return Key::INFINITE;
        }
        self.open_now += children.len() as u64;
        self.stats.peak_open_nodes = self.stats.peak_open_nodes.max(self.open_now + self.out.len() as u64);

        let result = loop {
            // Stable sort keeps conflict order among equal keys.
            children.sort_by(|a, b| a.key.cmp_key(&b.key));
            let best = children[0].key;
            if best.is_infinite() || best.cmp_key(&bound).is_gt() {
                break best;
            }
            let alternative = children.get(1).map_or(Key::INFINITE, |c| c.key);
            let child_path = std::mem::take(&mut children[0].path);
            let backed = self.visit(&child_path, best, bound.min(alternative));
            children[0].path = child_path;
            children[0].key = backed;
            if self.status.is_some() {
                break Key::INFINITE;
            }
        };
        self.open_now -= children.len() as u64;
        result
    }

    /// A path is a minimal diagnosis if dropping any single element breaks it.
    fn is_minimal(&mut self, path: &[CompIdx]) -> bool {
        for i in 0..path.len() {
            let mut smaller = path.to_vec();
            smaller.remove(i);
            if self.checker.check(&complement(self.n, &smaller), &[]) {
                return false;
            }
        }
        true
    }
}
