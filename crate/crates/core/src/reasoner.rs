//! Propositional consistency checking for normality assumptions.
//!
//! Every search talks to the theory through [`ConsistencyChecker`]; one call
//! to [`ConsistencyChecker::check`] is one consistency check, and that is the
//! unit all search statistics are expressed in.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dpi::{Atom, Clause, CompIdx, Dpi, DpiError, Literal, ModeAssignment, WireValue};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverStats {
    pub consistency_checks: u64,
    pub propagations: u64,
    pub decisions: u64,
}

pub trait ConsistencyChecker {
    /// Is `SD ∪ OBS ∪ MEAS ∪ extra ∪ {ok(c) | c ∈ normal}` satisfiable?
    fn check(&mut self, normal: &[CompIdx], extra: &[Clause]) -> bool;

    fn stats(&self) -> SolverStats;

    fn reset_stats(&mut self);
}

impl<T: ConsistencyChecker + ?Sized> ConsistencyChecker for &mut T {
    fn check(&mut self, normal: &[CompIdx], extra: &[Clause]) -> bool {
        (**self).check(normal, extra)
    }

    fn stats(&self) -> SolverStats {
        (**self).stats()
    }

    fn reset_stats(&mut self) {
        (**self).reset_stats()
    }
}

type Var = u32;
type Lit = u32;

#[inline]
fn lit(var: Var, negated: bool) -> Lit {
    var << 1 | u32::from(negated)
}

#[inline]
fn var_of(l: Lit) -> usize {
    (l >> 1) as usize
}

#[inline]
fn neg(l: Lit) -> Lit {
    l ^ 1
}

const UNASSIGNED: i8 = -1;

/// DPLL with unit propagation and chronological backtracking. Branching picks
/// the lowest-index unassigned variable, false first, so runs are reproducible.
#[derive(Debug, Clone)]
pub struct DpllReasoner {
    vars: HashMap<Atom, Var>,
    ok_vars: Vec<Var>,
    clauses: Vec<Vec<Lit>>,
    occurs: Vec<Vec<u32>>,
    base_units: Vec<Lit>,
    base_unsat: bool,
    assign: Vec<i8>,
    trail: Vec<Lit>,
    stats: SolverStats,
}

impl DpllReasoner {
    pub fn new(dpi: &Dpi) -> Self {
        let mut r = Self {
            vars: HashMap::new(),
            ok_vars: Vec::new(),
            clauses: Vec::new(),
            occurs: Vec::new(),
            base_units: Vec::new(),
            base_unsat: false,
            assign: Vec::new(),
            trail: Vec::new(),
            stats: SolverStats::default(),
        };
        for c in dpi.components() {
            let v = r.var(&Atom::Ok(c.clone()));
            r.ok_vars.push(v);
        }
        for w in dpi.wires() {
            r.var(&Atom::Wire(w.clone()));
        }
        for clause in dpi.system_description() {
            let lits = r.compile(clause);
            r.add_base(lits);
        }
        for fact in dpi.observations().iter().chain(dpi.measurements()) {
            let l = r.compile_literal(&fact.literal());
            r.base_units.push(l);
        }
        r
    }

    fn var(&mut self, atom: &Atom) -> Var {
        if let Some(&v) = self.vars.get(atom) {
            return v;
        }
        let v = self.assign.len() as Var;
        self.vars.insert(atom.clone(), v);
        self.assign.push(UNASSIGNED);
        self.occurs.push(Vec::new());
        self.occurs.push(Vec::new());
        v
    }

    fn compile_literal(&mut self, l: &Literal) -> Lit {
        lit(self.var(&l.atom), l.negated)
    }

    fn compile(&mut self, clause: &Clause) -> Vec<Lit> {
        let mut lits: Vec<Lit> = clause.literals().iter().map(|l| self.compile_literal(l)).collect();
        lits.sort_unstable();
        lits.dedup();
        lits
    }

    fn is_tautology(lits: &[Lit]) -> bool {
        lits.windows(2).any(|w| w[0] == neg(w[1]))
    }

    fn add_base(&mut self, lits: Vec<Lit>) {
        match lits.len() {
            0 => self.base_unsat = true,
            1 => self.base_units.push(lits[0]),
            _ if Self::is_tautology(&lits) => {}
            _ => self.push_clause(lits),
        }
    }

    fn push_clause(&mut self, lits: Vec<Lit>) {
        let ci = self.clauses.len() as u32;
        for &l in &lits {
            self.occurs[l as usize].push(ci);
        }
        self.clauses.push(lits);
    }

    fn pop_clauses(&mut self, keep: usize) {
        while self.clauses.len() > keep {
            let lits = self.clauses.pop().unwrap();
            for l in lits {
                let list = &mut self.occurs[l as usize];
                debug_assert_eq!(list.last().copied(), Some(self.clauses.len() as u32));
                list.pop();
            }
        }
    }

    #[inline]
    fn value(&self, l: Lit) -> i8 {
        let a = self.assign[var_of(l)];
        if a == UNASSIGNED {
            UNASSIGNED
        } else {
            a ^ (l & 1) as i8
        }
    }

    /// Returns false if `l` is already false.
    fn enqueue(&mut self, l: Lit) -> bool {
        match self.value(l) {
            1 => true,
            0 => false,
            _ => {
                self.assign[var_of(l)] = 1 ^ (l & 1) as i8;
                self.trail.push(l);
                true
            }
        }
    }

    /// Propagates from trail position `head`; returns false on conflict.
    fn propagate(&mut self, mut head: usize) -> bool {
        while head < self.trail.len() {
            let falsified = neg(self.trail[head]);
            head += 1;
            let watchers = std::mem::take(&mut self.occurs[falsified as usize]);
            let mut ok = true;
            for &ci in &watchers {
                let mut unassigned = None;
                let mut n_unassigned = 0;
                let mut satisfied = false;
                for &l in &self.clauses[ci as usize] {
                    match self.value(l) {
                        1 => {
                            satisfied = true;
                            break;
                        }
                        UNASSIGNED => {
                            n_unassigned += 1;
                            unassigned = Some(l);
                        }
                        _ => {}
                    }
                }
                if satisfied {
                    continue;
                }
                match n_unassigned {
                    0 => {
                        ok = false;
                        break;
                    }
                    1 => {
                        self.stats.propagations += 1;
                        self.enqueue(unassigned.unwrap());
                    }
                    _ => {}
                }
            }
            self.occurs[falsified as usize] = watchers;
            if !ok {
                return false;
            }
        }
        true
    }

    fn undo_to(&mut self, len: usize) {
        for l in self.trail.drain(len..) {
            self.assign[var_of(l)] = UNASSIGNED;
        }
    }

    fn solve(&mut self, assumptions: &[Lit]) -> bool {
        self.undo_to(0);
        if self.base_unsat {
            return false;
        }
        for i in 0..self.base_units.len() {
            if !self.enqueue(self.base_units[i]) {
                return false;
            }
        }
        for &l in assumptions {
            if !self.enqueue(l) {
                return false;
            }
        }
        // (trail length before decision, decision literal, already flipped)
        let mut decisions: Vec<(usize, Lit, bool)> = Vec::new();
        let mut consistent = self.propagate(0);
        loop {
            if !consistent {
                loop {
                    let Some((len, l, flipped)) = decisions.pop() else {
                        return false;
                    };
                    self.undo_to(len);
                    if !flipped {
                        let alt = neg(l);
                        decisions.push((len, alt, true));
                        self.enqueue(alt);
                        break;
                    }
                }
                let head = decisions.last().map_or(0, |d| d.0);
                consistent = self.propagate(head);
                continue;
            }
            let Some(v) = self.assign.iter().position(|&a| a == UNASSIGNED) else {
                return true;
            };
            self.stats.decisions += 1;
            let l = lit(v as Var, true);
            let len = self.trail.len();
            decisions.push((len, l, false));
            self.enqueue(l);
            consistent = self.propagate(len);
        }
    }

    /// Normality assumption for a [`ModeAssignment`], resolved against `dpi`.
    pub fn check_mode(&mut self, dpi: &Dpi, mode: &ModeAssignment, extra: &[Clause]) -> Result<bool, DpiError> {
        let normal = dpi.indices(&mode.normal.iter().map(|c| c.as_str()).collect::<Vec<_>>())?;
        Ok(self.check(&normal, extra))
    }
}

impl ConsistencyChecker for DpllReasoner {
    fn check(&mut self, normal: &[CompIdx], extra: &[Clause]) -> bool {
        self.stats.consistency_checks += 1;
        let mut assumptions: Vec<Lit> = normal.iter().map(|&c| lit(self.ok_vars[c], false)).collect();
        let keep = self.clauses.len();
        let mut trivially_false = false;
        for clause in extra {
            let lits = self.compile(clause);
            match lits.len() {
                0 => trivially_false = true,
                1 => assumptions.push(lits[0]),
                _ if Self::is_tautology(&lits) => {}
                _ => self.push_clause(lits),
            }
        }
        let result = !trivially_false && self.solve(&assumptions);
        self.undo_to(0);
        self.pop_clauses(keep);
        result
    }

    fn stats(&self) -> SolverStats {
        self.stats
    }

    fn reset_stats(&mut self) {
        self.stats = SolverStats::default();
    }
}

/// One recorded consistency check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckRecord {
    pub normal: Vec<CompIdx>,
    pub extra: Vec<Clause>,
    pub consistent: bool,
}

/// Wraps a checker and records every call made through it.
#[derive(Debug, Clone)]
pub struct TracingChecker<R> {
    inner: R,
    pub log: Vec<CheckRecord>,
}

impl<R: ConsistencyChecker> TracingChecker<R> {
    pub fn new(inner: R) -> Self {
        Self { inner, log: Vec::new() }
    }

    pub fn into_inner(self) -> R {
        self.inner
    }
}

impl<R: ConsistencyChecker> ConsistencyChecker for TracingChecker<R> {
    fn check(&mut self, normal: &[CompIdx], extra: &[Clause]) -> bool {
        let consistent = self.inner.check(normal, extra);
        self.log.push(CheckRecord {
            normal: normal.to_vec(),
            extra: extra.to_vec(),
            consistent,
        });
        consistent
    }

    fn stats(&self) -> SolverStats {
        self.inner.stats()
    }

    fn reset_stats(&mut self) {
        self.inner.reset_stats()
    }
}

/// `check_consistent` on a fresh reasoner.
pub fn check_consistent(dpi: &Dpi, normal: &ModeAssignment, extra: &[Clause]) -> Result<bool, DpiError> {
    DpllReasoner::new(dpi).check_mode(dpi, normal, extra)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Entailment {
    Yes,
    No,
    Unknown,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReasonerError {
    #[error("the theory is inconsistent under the given normality assumption")]
    InconsistentBase,
}

/// Does the theory with `normal` assumed entail `prop`? Uses two consistency
/// checks: one with `¬prop` and one with `prop` added.
pub fn entails<R: ConsistencyChecker + ?Sized>(
    reasoner: &mut R,
    normal: &[CompIdx],
    prop: &WireValue,
) -> Result<Entailment, ReasonerError> {
    let holds = Clause::unit(prop.literal());
    let fails = Clause::unit(prop.literal().negate());
    let can_fail = reasoner.check(normal, std::slice::from_ref(&fails));
    let can_hold = reasoner.check(normal, std::slice::from_ref(&holds));
    match (can_fail, can_hold) {
        (false, false) => Err(ReasonerError::InconsistentBase),
        (false, true) => Ok(Entailment::Yes),
        (true, false) => Ok(Entailment::No),
        (true, true) => Ok(Entailment::Unknown),
    }
}
