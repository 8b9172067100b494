//! Independent reference computations shared by the integration tests.

#![allow(dead_code)]

use std::collections::BTreeSet;

use mbdiag::dpi::random::{random_instance, RandomCircuitConfig, RandomInstance};
use mbdiag::{Conflict, Diagnosis};

pub type Family = BTreeSet<BTreeSet<String>>;

pub fn diag_family(ds: &[Diagnosis]) -> Family {
    ds.iter().map(|d| d.comps.iter().map(|c| c.to_string()).collect()).collect()
}

pub fn conflict_family(cs: &[Conflict]) -> Family {
    cs.iter().map(|c| c.comps.iter().map(|c| c.to_string()).collect()).collect()
}

pub fn family(sets: &[&[&str]]) -> Family {
    sets.iter().map(|s| s.iter().map(|x| x.to_string()).collect()).collect()
}

/// Minimal hitting sets by Berge's incremental algorithm.
pub fn minimal_hitting_sets(sets: &Family) -> Family {
    let mut current: Vec<BTreeSet<String>> = vec![BTreeSet::new()];
    for s in sets {
        let mut next: Vec<BTreeSet<String>> = Vec::new();
        for h in &current {
            if h.intersection(s).next().is_some() {
                next.push(h.clone());
            } else {
                for e in s {
                    let mut g = h.clone();
                    g.insert(e.clone());
                    next.push(g);
                }
            }
        }
        next.sort();
        next.dedup();
        let minimal: Vec<BTreeSet<String>> = next
            .iter()
            .filter(|h| !next.iter().any(|o| o != *h && o.is_subset(h)))
            .cloned()
            .collect();
        current = minimal;
    }
    current.into_iter().collect()
}

/// Every permutation of `items` (Heap's algorithm).
pub fn permutations<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    fn heap<T: Clone>(k: usize, a: &mut Vec<T>, out: &mut Vec<Vec<T>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        heap(k - 1, a, out);
        for i in 0..k - 1 {
            if k.is_multiple_of(2) {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
            heap(k - 1, a, out);
        }
    }
    let mut a = items.to_vec();
    let mut out = Vec::new();
    heap(a.len(), &mut a, &mut out);
    out
}

/// Seeded random circuit with between 3 and 10 gates.
pub fn small_instance(seed: u64, random_priors: bool) -> RandomInstance {
    let cfg = RandomCircuitConfig {
        gates: 3 + (seed % 8) as usize,
        random_priors,
        ..Default::default()
    };
    random_instance(seed, &cfg)
}

/// Product of priors over `d` and complements elsewhere, by direct multiplication.
pub fn prior_product_direct(dpi: &mbdiag::Dpi, d: &Diagnosis) -> f64 {
    dpi.components()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let p = dpi.prior(i);
            if d.contains(c) {
                p
            } else {
                1.0 - p
            }
        })
        .product()
}
