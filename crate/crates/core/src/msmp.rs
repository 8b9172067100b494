//! Minimal subsets subject to a monotone predicate.
//!
//! One divide-and-conquer routine serves both directions: a minimal conflict
//! is a minimal set whose normality is inconsistent, a minimal diagnosis is a
//! minimal set whose *removal* from the normality assumption is consistent.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::dpi::{CompIdx, ComponentId, Dpi};
use crate::reasoner::ConsistencyChecker;

/// A set of components whose joint normality is inconsistent. Components are
/// listed in the order the extraction identified them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Conflict {
    pub comps: Vec<ComponentId>,
}

impl Conflict {
    pub fn from_indices(dpi: &Dpi, idxs: &[CompIdx]) -> Self {
        Self { comps: dpi.ids(idxs) }
    }

    /// Components in canonical sorted order.
    pub fn sorted(&self) -> Vec<ComponentId> {
        let mut v = self.comps.clone();
        v.sort();
        v
    }
}

impl fmt::Display for Conflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", join(&self.comps))
    }
}

/// A set of components whose abnormality (all others normal) is consistent.
///
/// Equality, ordering and hashing look at the component set only; `prob` is a
/// score attached by consumers (0 when unscored).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnosis {
    pub comps: Vec<ComponentId>,
    #[serde(default)]
    pub prob: f64,
}

impl Diagnosis {
    pub fn new(mut comps: Vec<ComponentId>) -> Self {
        comps.sort();
        comps.dedup();
        Self { comps, prob: 0.0 }
    }

    pub fn from_indices(dpi: &Dpi, idxs: &[CompIdx]) -> Self {
        Self::new(dpi.ids(idxs))
    }

    pub fn from_strs<S: AsRef<str>>(ids: &[S]) -> Self {
        Self::new(crate::dpi::comp_ids(ids))
    }

    pub fn len(&self) -> usize {
        self.comps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn contains(&self, c: &ComponentId) -> bool {
        self.comps.binary_search(c).is_ok()
    }

    pub fn is_subset_of(&self, other: &Diagnosis) -> bool {
        self.comps.iter().all(|c| other.contains(c))
    }

    pub fn indices(&self, dpi: &Dpi) -> Vec<CompIdx> {
        dpi.indices(&self.comps).expect("diagnosis components belong to the instance")
    }
}

impl PartialEq for Diagnosis {
    fn eq(&self, other: &Self) -> bool {
        self.comps == other.comps
    }
}

impl Eq for Diagnosis {}

impl Hash for Diagnosis {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.comps.hash(state)
    }
}

impl PartialOrd for Diagnosis {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Diagnosis {
    /// Cardinality first, then lexicographic on the sorted ids.
    fn cmp(&self, other: &Self) -> Ordering {
        self.comps
            .len()
            .cmp(&other.comps.len())
            .then_with(|| self.comps.cmp(&other.comps))
    }
}

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", join(&self.comps))
    }
}

fn join(ids: &[ComponentId]) -> String {
    ids.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(",")
}

/// Divide-and-conquer core. Precondition: `holds(background)` is false
/// whenever `background_grew` is false. Lists are split into the first
/// `⌈n/2⌉` elements and the rest.
fn divide<P>(holds: &mut P, background: &mut Vec<CompIdx>, background_grew: bool, cands: &[CompIdx]) -> Vec<CompIdx>
where
    P: FnMut(&[CompIdx]) -> bool,
{
    if background_grew && holds(background) {
        return Vec::new();
    }
    if cands.len() == 1 {
        return cands.to_vec();
    }
    let (left, right) = cands.split_at(cands.len().div_ceil(2));
    let base = background.len();

    background.extend_from_slice(left);
    let found_right = divide(holds, background, !left.is_empty(), right);
    background.truncate(base);

    background.extend_from_slice(&found_right);
    let found_left = divide(holds, background, !found_right.is_empty(), left);
    background.truncate(base);

    let mut out = found_right;
    out.extend(found_left);
    out
}

/// Minimal subset of `cands` for which the monotone predicate `holds`, or
/// `None` if `holds(cands)` is false. `holds(∅)` must be false.
pub fn min_subset<P>(mut holds: P, cands: &[CompIdx]) -> Option<Vec<CompIdx>>
where
    P: FnMut(&[CompIdx]) -> bool,
{
    if !holds(cands) {
        return None;
    }
    if cands.is_empty() {
        return Some(Vec::new());
    }
    Some(divide(&mut holds, &mut Vec::new(), false, cands))
}

/// QuickXplain: a minimal conflict within `candidates`, or `None` if assuming
/// all candidates normal is consistent. The base check is counted.
pub fn quickxplain_min_conflict<R: ConsistencyChecker + ?Sized>(
    checker: &mut R,
    candidates: &[CompIdx],
) -> Option<Vec<CompIdx>> {
    min_subset(|normal| !checker.check(normal, &[]), candidates)
}

/// The dual: a minimal diagnosis within `candidates` over a system with
/// `n_comps` components (everything outside `candidates` stays normal).
/// Returns `Some(∅)` for a consistent instance and `None` if even
/// retracting every candidate leaves an inconsistency.
pub fn invqx_min_diagnosis<R: ConsistencyChecker + ?Sized>(
    checker: &mut R,
    n_comps: usize,
    candidates: &[CompIdx],
) -> Option<Vec<CompIdx>> {
    let all: Vec<CompIdx> = (0..n_comps).collect();
    if checker.check(&all, &[]) {
        return Some(Vec::new());
    }
    let mut normal = Vec::with_capacity(n_comps);
    let mut abnormal = vec![false; n_comps];
    let found = min_subset(
        |removed| {
            for &c in removed {
                abnormal[c] = true;
            }
            normal.clear();
            normal.extend((0..n_comps).filter(|&c| !abnormal[c]));
            for &c in removed {
                abnormal[c] = false;
            }
            checker.check(&normal, &[])
        },
        candidates,
    )?;
    let mut d = found;
    d.sort_unstable();
    Some(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::full_adder;
    use crate::reasoner::{DpllReasoner, TracingChecker};

    fn idx(dpi: &Dpi, ids: &[&str]) -> Vec<CompIdx> {
        dpi.indices(ids).unwrap()
    }

    fn names(dpi: &Dpi, idxs: &[CompIdx]) -> Vec<String> {
        let mut v: Vec<String> = idxs.iter().map(|&i| dpi.components()[i].to_string()).collect();
        v.sort();
        v
    }

    #[test]
    fn single_healthy_candidate_has_no_conflict() {
        let dpi = full_adder();
        let mut r = DpllReasoner::new(&dpi);
        assert_eq!(quickxplain_min_conflict(&mut r, &idx(&dpi, &["A1"])), None);
        assert_eq!(r.stats().consistency_checks, 1);
    }

    #[test]
    fn conflict_at_hs_tree_root_takes_eight_checks() {
        let dpi = full_adder();
        let mut r = DpllReasoner::new(&dpi);
        let c = quickxplain_min_conflict(&mut r, &idx(&dpi, &["A1", "A2", "O1", "X1", "X2"])).unwrap();
        assert_eq!(names(&dpi, &c), ["A2", "O1", "X1"]);
        assert_eq!(r.stats().consistency_checks, 8);
    }

    #[test]
    fn trace_for_four_candidates() {
        let dpi = full_adder();
        let mut t = TracingChecker::new(DpllReasoner::new(&dpi));
        let c = quickxplain_min_conflict(&mut t, &idx(&dpi, &["A1", "O1", "X1", "X2"])).unwrap();
        assert_eq!(names(&dpi, &c), ["X1", "X2"]);
        let steps: Vec<(Vec<String>, bool)> = t.log.iter().map(|r| (names(&dpi, &r.normal), r.consistent)).collect();
        let expect = |ids: &[&str], ok: bool| {
            let mut v: Vec<String> = ids.iter().map(|s| s.to_string()).collect();
            v.sort();
            (v, ok)
        };
        assert_eq!(
            steps,
            vec![
                expect(&["A1", "O1", "X1", "X2"], false),
                expect(&["A1", "O1"], true),
                expect(&["A1", "O1", "X1"], true),
                expect(&["A1", "O1", "X2"], true),
                expect(&["X1", "X2"], false),
            ]
        );
    }

    #[test]
    fn empty_candidate_list() {
        let dpi = full_adder();
        let mut r = DpllReasoner::new(&dpi);
        assert_eq!(quickxplain_min_conflict(&mut r, &[]), None);
    }

    #[test]
    fn diagnosis_in_declaration_order() {
        let dpi = full_adder();
        let mut r = DpllReasoner::new(&dpi);
        let d = invqx_min_diagnosis(&mut r, 5, &idx(&dpi, &["X1", "X2", "A1", "A2", "O1"])).unwrap();
        assert_eq!(names(&dpi, &d), ["X1"]);
    }

    #[test]
    fn diagnosis_of_consistent_instance_is_empty() {
        let spec = crate::dpi::parse_circuit_dsl("inputs a\ngate G buf a\nobs a=1 G=1").unwrap();
        let dpi = crate::dpi::encode_circuit_to_dpi(&spec).unwrap();
        let mut r = DpllReasoner::new(&dpi);
        assert_eq!(invqx_min_diagnosis(&mut r, 1, &[0]), Some(vec![]));
    }

    #[test]
    fn no_diagnosis_within_candidates() {
        let dpi = full_adder();
        let mut r = DpllReasoner::new(&dpi);
        // X1 normal and A1, A2, O1 normal still contradict the observations.
        assert_eq!(invqx_min_diagnosis(&mut r, 5, &idx(&dpi, &["X2"])), None);
    }

    #[test]
    fn diagnosis_ordering_and_equality() {
        let a = Diagnosis::from_strs(&["X1"]);
        let mut b = Diagnosis::from_strs(&["X2", "A2"]);
        b.prob = 0.5;
        assert!(a < b);
        assert_eq!(b, Diagnosis::from_strs(&["A2", "X2"]));
        assert_eq!(b.to_string(), "[A2,X2]");
        assert!(a.is_subset_of(&Diagnosis::from_strs(&["X1", "O1"])));
    }
}
