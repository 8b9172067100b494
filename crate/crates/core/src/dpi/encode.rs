use super::circuit::{CircuitSpec, Gate, GateKind};
use super::{Atom, Clause, Dpi, DpiError, Literal};

/// Fault prior used when neither a per-component nor a per-kind override exists.
pub const DEFAULT_PRIOR: f64 = 0.01;

/// CNF for `ok(g) -> (out <-> kind(inputs))`.
pub fn gate_clauses(gate: &Gate) -> Vec<Clause> {
    let not_ok = Literal::neg(Atom::Ok(gate.id.clone()));
    let out = |v: bool| Literal::wire(&gate.out, v);
    let input = |i: usize, v: bool| Literal::wire(&gate.inputs[i], v);
    let n = gate.inputs.len();
    let mut clauses = Vec::new();
    match gate.kind {
        GateKind::And => {
            for i in 0..n {
                clauses.push(Clause::new([not_ok.clone(), out(false), input(i, true)]));
            }
            let mut big = vec![not_ok.clone(), out(true)];
            big.extend((0..n).map(|i| input(i, false)));
            clauses.push(Clause::new(big));
        }
        GateKind::Or => {
            for i in 0..n {
                clauses.push(Clause::new([not_ok.clone(), out(true), input(i, false)]));
            }
            let mut big = vec![not_ok.clone(), out(false)];
            big.extend((0..n).map(|i| input(i, true)));
            clauses.push(Clause::new(big));
        }
        GateKind::Not => {
            clauses.push(Clause::new([not_ok.clone(), out(true), input(0, true)]));
            clauses.push(Clause::new([not_ok, out(false), input(0, false)]));
        }
        GateKind::Buf => {
            clauses.push(Clause::new([not_ok.clone(), out(false), input(0, true)]));
            clauses.push(Clause::new([not_ok, out(true), input(0, false)]));
        }
        GateKind::Xor => {
            // One clause per input row: the row forces out to the row's parity.
            for row in 0u32..(1 << n) {
                let mut lits = vec![not_ok.clone()];
                let mut parity = false;
                for i in 0..n {
                    let bit = row >> i & 1 == 1;
                    parity ^= bit;
                    lits.push(input(i, !bit));
                }
                lits.push(out(parity));
                let clause = Clause::new(lits);
                let tautology = clause
                    .literals()
                    .iter()
                    .any(|l| clause.literals().contains(&l.negate()));
                if !tautology {
                    clauses.push(clause);
                }
            }
        }
    }
    clauses
}

/// Compiles a gate netlist into a diagnosis problem instance.
pub fn encode_circuit_to_dpi(spec: &CircuitSpec) -> Result<Dpi, DpiError> {
    spec.validate().map_err(DpiError::Circuit)?;
    let sd: Vec<Clause> = spec.gates.iter().flat_map(gate_clauses).collect();
    let priors = spec
        .gates
        .iter()
        .map(|g| {
            let p = spec
                .priors
                .get(&g.id)
                .or_else(|| spec.kind_priors.get(&g.kind))
                .copied()
                .unwrap_or(DEFAULT_PRIOR);
            (g.id.clone(), p)
        })
        .collect();
    Dpi::new(
        sd,
        spec.gates.iter().map(|g| g.id.clone()),
        spec.observations.clone(),
        Vec::new(),
        &priors,
    )
}
