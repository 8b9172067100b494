//! Exhaustive reference computations for small instances.
//!
//! Subsets are enumerated by ascending cardinality and skipped when they
//! contain an already found minimal set, so every reported set is minimal.

use thiserror::Error;

use super::{CompIdx, Dpi};
use crate::msmp::{Conflict, Diagnosis};
use crate::reasoner::{ConsistencyChecker, DpllReasoner};

/// Largest component count the oracles accept.
pub const MAX_ORACLE_COMPONENTS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("{0} components exceed the brute-force limit of {MAX_ORACLE_COMPONENTS}")]
    TooLarge(usize),
}

/// All masks over `n` bits ordered by popcount, then by ascending index tuple.
fn masks_by_cardinality(n: usize) -> Vec<u32> {
    let mut masks: Vec<u32> = (0..(1u32 << n)).collect();
    let key = |m: u32| -> (u32, Vec<u32>) { (m.count_ones(), (0..n as u32).filter(|i| m >> i & 1 == 1).collect()) };
    masks.sort_by_cached_key(|&m| key(m));
    masks
}

fn bits(mask: u32, n: usize) -> Vec<CompIdx> {
    (0..n).filter(|&i| mask >> i & 1 == 1).collect()
}

fn minimal_sets(dpi: &Dpi, mut qualifies: impl FnMut(&mut DpllReasoner, u32) -> bool) -> Result<Vec<u32>, OracleError> {
    let n = dpi.num_components();
    if n > MAX_ORACLE_COMPONENTS {
        return Err(OracleError::TooLarge(n));
    }
    let mut reasoner = DpllReasoner::new(dpi);
    let mut found: Vec<u32> = Vec::new();
    for mask in masks_by_cardinality(n) {
        if found.iter().any(|&f| f & !mask == 0) {
            continue;
        }
        if qualifies(&mut reasoner, mask) {
            found.push(mask);
        }
    }
    Ok(found)
}

/// Every subset-minimal diagnosis, smallest first.
pub fn brute_force_minimal_diagnoses(dpi: &Dpi) -> Result<Vec<Diagnosis>, OracleError> {
    let n = dpi.num_components();
    let full = if n == 0 { 0 } else { u32::MAX >> (32 - n) };
    let found = minimal_sets(dpi, |r, mask| r.check(&bits(full & !mask, n), &[]))?;
    Ok(found.into_iter().map(|m| Diagnosis::from_indices(dpi, &bits(m, n))).collect())
}

/// Every subset-minimal conflict, smallest first.
pub fn brute_force_minimal_conflicts(dpi: &Dpi) -> Result<Vec<Conflict>, OracleError> {
    let n = dpi.num_components();
    let found = minimal_sets(dpi, |r, mask| !r.check(&bits(mask, n), &[]))?;
    Ok(found.into_iter().map(|m| Conflict::from_indices(dpi, &bits(m, n))).collect())
}
