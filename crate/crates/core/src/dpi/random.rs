//! Seeded random faulty circuits for property tests and benchmarks.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::circuit::{CircuitSpec, Gate, GateFault, GateKind};
use super::{encode_circuit_to_dpi, ComponentId, Dpi, WireValue};

#[derive(Debug, Clone)]
pub struct RandomCircuitConfig {
    pub gates: usize,
    pub min_inputs: usize,
    pub max_inputs: usize,
    pub max_faults: usize,
    /// Draw per-gate priors from `[0.001, 0.3)` instead of the default.
    pub random_priors: bool,
}

impl Default for RandomCircuitConfig {
    fn default() -> Self {
        Self {
            gates: 8,
            min_inputs: 2,
            max_inputs: 4,
            max_faults: 2,
            random_priors: false,
        }
    }
}

/// A generated circuit whose observations come from a concretely faulted copy.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub circuit: CircuitSpec,
    pub faults: BTreeMap<ComponentId, GateFault>,
    pub dpi: Dpi,
}

fn build_netlist(rng: &mut ChaCha8Rng, cfg: &RandomCircuitConfig) -> CircuitSpec {
    let n_inputs = rng.gen_range(cfg.min_inputs..=cfg.max_inputs.max(cfg.min_inputs));
    let inputs: Vec<String> = (0..n_inputs).map(|i| format!("i{i}")).collect();
    let mut wires = inputs.clone();
    let mut gates = Vec::with_capacity(cfg.gates);
    for g in 0..cfg.gates {
        let kind = match rng.gen_range(0..10) {
            0..=2 => GateKind::And,
            3..=5 => GateKind::Or,
            6..=7 => GateKind::Xor,
            8 => GateKind::Not,
            _ => GateKind::Buf,
        };
        let fanin = if kind.is_unary() { 1 } else { 2.min(wires.len()) };
        let kind = if fanin == 1 && !kind.is_unary() { GateKind::Buf } else { kind };
        // Prefer recent wires so circuits get some depth.
        let window = wires.len().min(n_inputs + 4);
        let pool: Vec<String> = wires[wires.len() - window..].to_vec();
        let ins: Vec<String> = pool.choose_multiple(rng, fanin).cloned().collect();
        let id = format!("G{}", g + 1);
        gates.push(Gate {
            id: ComponentId::new(&id).expect("generated id"),
            kind,
            out: id.clone(),
            inputs: ins,
        });
        wires.push(id);
    }
    let used: std::collections::HashSet<&String> = gates.iter().flat_map(|g| g.inputs.iter()).collect();
    let mut outputs: Vec<String> = gates.iter().filter(|g| !used.contains(&g.out)).map(|g| g.out.clone()).collect();
    // Observe one extra internal wire now and then for richer conflicts.
    if gates.len() > 3 && rng.gen_bool(0.3) {
        let extra = gates[rng.gen_range(0..gates.len())].out.clone();
        if !outputs.contains(&extra) {
            outputs.push(extra);
        }
    }
    CircuitSpec {
        name: String::new(),
        inputs,
        outputs,
        gates,
        ..Default::default()
    }
}

/// Generates a circuit plus fault injection whose observed outputs differ
/// from the fault-free prediction. Deterministic in `seed`.
pub fn random_instance(seed: u64, cfg: &RandomCircuitConfig) -> RandomInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut circuit = build_netlist(&mut rng, cfg);
        let input_vals: BTreeMap<String, bool> = circuit.inputs.iter().map(|w| (w.clone(), rng.gen_bool(0.5))).collect();
        let good = circuit.evaluate(&input_vals).expect("generated netlist is valid");
        for _attempt in 0..8 {
            let n_faults = rng.gen_range(1..=cfg.max_faults.clamp(1, circuit.gates.len().max(1)));
            let mut faults = BTreeMap::new();
            for g in circuit.gates.choose_multiple(&mut rng, n_faults) {
                let fault = if rng.gen_bool(0.7) {
                    // Flip the gate's fault-free value so the fault is locally visible.
                    GateFault::StuckAt(!good[&g.out])
                } else {
                    GateFault::Inverted
                };
                faults.insert(g.id.clone(), fault);
            }
            let bad = circuit.evaluate_faulty(&input_vals, &faults).expect("valid netlist");
            if circuit.outputs.iter().all(|o| good[o] == bad[o]) {
                continue;
            }
            circuit.observations = circuit
                .inputs
                .iter()
                .chain(&circuit.outputs)
                .map(|w| WireValue::new(w.clone(), bad[w]))
                .collect();
            if cfg.random_priors {
                for g in &circuit.gates {
                    circuit.priors.insert(g.id.clone(), rng.gen_range(0.001..0.3));
                }
            }
            let dpi = encode_circuit_to_dpi(&circuit).expect("generated circuit encodes");
            return RandomInstance { circuit, faults, dpi };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reasoner::{check_consistent, ConsistencyChecker, DpllReasoner};

    #[test]
    fn instances_are_faulty_and_reproducible() {
        let cfg = RandomCircuitConfig::default();
        for seed in 0..20 {
            let a = random_instance(seed, &cfg);
            let b = random_instance(seed, &cfg);
            assert_eq!(a.dpi, b.dpi);
            assert_eq!(a.dpi.num_components(), cfg.gates);
            let all = crate::dpi::ModeAssignment::all_normal(&a.dpi);
            assert!(!check_consistent(&a.dpi, &all, &[]).unwrap(), "seed {seed} should be faulty");
            // The injected fault set is always a (not necessarily minimal) diagnosis.
            let normal: Vec<usize> = (0..a.dpi.num_components())
                .filter(|&i| !a.faults.contains_key(&a.dpi.components()[i]))
                .collect();
            assert!(DpllReasoner::new(&a.dpi).check(&normal, &[]));
        }
    }
}
