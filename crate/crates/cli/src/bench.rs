//! Engine timings over problem sets.
//!
//! Each (problem, engine, order, repetition) produces one row. A run whose
//! check budget runs out is still reported with whatever it found, and a
//! note goes to stderr.

use std::collections::BTreeSet;
use std::io::Write;
use std::time::Instant;

use mbdiag::dpi::oracle::{brute_force_minimal_diagnoses, MAX_ORACLE_COMPONENTS};
use mbdiag::hitting_set::{Budget, SearchConfig, SearchOrder};
use serde::Serialize;

use crate::cli::BenchArgs;
use crate::commands::run_engine;
use crate::registry::load_many;
use crate::CliError;

pub const CSV_HEADER: &str = "problem,engine,order,k,seed,wall_ms,checks,conflicts_computed,peak_open_nodes,found";

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BenchRow {
    pub problem: String,
    pub engine: String,
    pub order: SearchOrder,
    pub k: Option<usize>,
    /// Generator seed of a random problem, 0 for fixed ones.
    pub seed: u64,
    pub wall_ms: f64,
    pub checks: u64,
    pub conflicts_computed: u64,
    pub peak_open_nodes: u64,
    pub found: usize,
    pub timed_out: bool,
}

#[derive(Debug, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub timeouts: usize,
    pub mismatches: usize,
}

pub fn run(a: &BenchArgs, err: &mut dyn Write) -> Result<BenchReport, CliError> {
    let mut problems = Vec::new();
    for name in &a.problems {
        problems.extend(load_many(name)?);
    }
    let mut report = BenchReport::default();
    for p in &problems {
        let truth = if a.verify && p.dpi.num_components() <= MAX_ORACLE_COMPONENTS {
            let ds = brute_force_minimal_diagnoses(&p.dpi).map_err(|e| CliError::Input(e.to_string()))?;
            Some(ds.into_iter().map(|d| d.comps).collect::<BTreeSet<_>>())
        } else {
            None
        };
        for &engine in &a.engines {
            for &order in &a.orders {
                let cfg = SearchConfig {
                    order,
                    k: a.k,
                    budget: Budget {
                        max_checks: a.max_checks,
                        max_nodes: None,
                    },
                };
                for _ in 0..a.reps.max(1) {
                    let start = Instant::now();
                    let outcome = run_engine(engine, &p.dpi, &cfg);
                    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
                    let timed_out = outcome.exhausted();
                    if timed_out {
                        report.timeouts += 1;
                        writeln!(
                            err,
                            "timeout: {} {} {:?} stopped after {} checks with {} diagnoses",
                            p.id,
                            engine.as_str(),
                            order,
                            outcome.stats.consistency_checks,
                            outcome.diagnoses.len()
                        )?;
                    } else if let (Some(truth), None) = (&truth, a.k) {
                        let got: BTreeSet<_> = outcome.diagnoses.iter().map(|d| d.comps.clone()).collect();
                        if &got != truth {
                            report.mismatches += 1;
                            writeln!(err, "mismatch: {} {} {:?}", p.id, engine.as_str(), order)?;
                        }
                    }
                    report.rows.push(BenchRow {
                        problem: p.id.clone(),
                        engine: engine.as_str().to_string(),
                        order,
                        k: a.k,
                        seed: p.seed.unwrap_or(0),
                        wall_ms,
                        checks: outcome.stats.consistency_checks,
                        conflicts_computed: outcome.stats.conflicts_computed,
                        peak_open_nodes: outcome.stats.peak_open_nodes,
                        found: outcome.diagnoses.len(),
                        timed_out,
                    });
                }
            }
        }
    }
    Ok(report)
}

pub fn write_csv(out: &mut dyn Write, rows: &[BenchRow]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        let order = match r.order {
            SearchOrder::Cardinality => "cardinality",
            SearchOrder::Probability => "probability",
        };
        let k = r.k.map_or(String::new(), |k| k.to_string());
        writeln!(
            out,
            "{},{},{},{},{},{:.3},{},{},{},{}",
            r.problem, r.engine, order, k, r.seed, r.wall_ms, r.checks, r.conflicts_computed, r.peak_open_nodes, r.found
        )?;
    }
    Ok(())
}
