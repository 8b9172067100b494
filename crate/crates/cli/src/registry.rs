//! Resolves problem names to diagnosis instances.
//!
//! Accepted names are `fulladder`, `random:SEED` or `random:SEED:GATES`, and
//! paths to a JSON instance or a circuit DSL file. Benchmarks additionally
//! accept `corpus:SEED:COUNT`, which expands to `COUNT` random circuits with
//! between 3 and 10 gates.

use std::collections::BTreeMap;
use std::path::Path;

use mbdiag::dpi::random::{random_instance, RandomCircuitConfig};
use mbdiag::dpi::{encode_circuit_to_dpi, parse_circuit_dsl, parse_dpi_json, CircuitSpec, GateFault};
use mbdiag::fixtures::{full_adder, full_adder_circuit};
use mbdiag::{ComponentId, Dpi};
use serde::Serialize;

use crate::CliError;

const DEFAULT_RANDOM_GATES: usize = 8;

#[derive(Debug, Clone)]
pub struct Problem {
    pub id: String,
    pub dpi: Dpi,
    /// The netlist, when the instance came from a circuit.
    pub circuit: Option<CircuitSpec>,
    /// Faults injected by the generator, for random instances.
    pub faults: Option<BTreeMap<ComponentId, GateFault>>,
    /// Seed of a generated instance.
    pub seed: Option<u64>,
}

/// Summary row for problem listings.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ProblemInfo {
    pub id: String,
    pub description: String,
    pub components: Option<usize>,
}

pub fn load_problem(name: &str) -> Result<Problem, CliError> {
    if name == "fulladder" {
        return Ok(Problem {
            id: name.to_string(),
            dpi: full_adder(),
            circuit: Some(full_adder_circuit()),
            faults: None,
            seed: None,
        });
    }
    if let Some(rest) = name.strip_prefix("random:") {
        let parts = parse_numbers(name, rest)?;
        let (seed, gates) = match parts.as_slice() {
            [s] => (*s, DEFAULT_RANDOM_GATES),
            [s, g] if *g > 0 => (*s, *g as usize),
            _ => return Err(bad_name(name)),
        };
        return Ok(random_problem(seed, gates));
    }
    load_file(name)
}

/// Expands `corpus:SEED:COUNT` into its members and loads anything else as one problem.
pub fn load_many(name: &str) -> Result<Vec<Problem>, CliError> {
    let Some(rest) = name.strip_prefix("corpus:") else {
        return Ok(vec![load_problem(name)?]);
    };
    match parse_numbers(name, rest)?.as_slice() {
        [seed, count] => Ok((0..*count)
            .map(|i| {
                let s = seed + i;
                random_problem(s, 3 + (s % 8) as usize)
            })
            .collect()),
        _ => Err(bad_name(name)),
    }
}

pub fn builtin_problems() -> Vec<ProblemInfo> {
    vec![
        ProblemInfo {
            id: "fulladder".into(),
            description: "one-bit full adder with inputs (1,0,1), sum 1 and carry 0 observed".into(),
            components: Some(full_adder().num_components()),
        },
        ProblemInfo {
            id: "random:<seed>[:<gates>]".into(),
            description: format!("seeded random circuit with injected faults ({DEFAULT_RANDOM_GATES} gates by default)"),
            components: None,
        },
    ]
}

fn random_problem(seed: u64, gates: usize) -> Problem {
    let cfg = RandomCircuitConfig {
        gates,
        ..Default::default()
    };
    let inst = random_instance(seed, &cfg);
    Problem {
        id: format!("random:{seed}:{gates}"),
        dpi: inst.dpi,
        circuit: Some(inst.circuit),
        faults: Some(inst.faults),
        seed: Some(seed),
    }
}

fn load_file(name: &str) -> Result<Problem, CliError> {
    let path = Path::new(name);
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read problem {name:?}: {e}")))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) || text.trim_start().starts_with('{');
    if is_json {
        let dpi = parse_dpi_json(&text).map_err(|e| CliError::Input(format!("{name}: {e}")))?;
        return Ok(Problem {
            id: name.to_string(),
            dpi,
            circuit: None,
            faults: None,
            seed: None,
        });
    }
    let circuit = parse_circuit_dsl(&text).map_err(|e| CliError::Input(format!("{name}: {e}")))?;
    let dpi = encode_circuit_to_dpi(&circuit).map_err(|e| CliError::Input(format!("{name}: {e}")))?;
    Ok(Problem {
        id: name.to_string(),
        dpi,
        circuit: Some(circuit),
        faults: None,
        seed: None,
    })
}

fn parse_numbers(name: &str, rest: &str) -> Result<Vec<u64>, CliError> {
    rest.split(':').map(|p| p.parse::<u64>().map_err(|_| bad_name(name))).collect()
}

fn bad_name(name: &str) -> CliError {
    CliError::Input(format!("malformed problem name {name:?}"))
}
