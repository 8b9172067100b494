//! Answer sources for sessions.

use std::collections::BTreeMap;

use super::{Answer, AnswerValue, Query, SequentialError, SessionState};
use crate::dpi::{CircuitSpec, ComponentId, GateFault};
use crate::msmp::Diagnosis;

/// Something that answers queries.
pub trait Oracle {
    fn answer(&mut self, state: &SessionState, query: &Query) -> Result<Answer, SequentialError>;
}

/// The "real" faulty system: a netlist with concrete wrong gate behaviours,
/// driven by the observed inputs.
#[derive(Debug, Clone)]
pub struct SimulatedOracle {
    faults: BTreeMap<ComponentId, GateFault>,
    values: BTreeMap<String, bool>,
}

impl SimulatedOracle {
    /// Fails if the faulted netlist does not reproduce the circuit's observations.
    pub fn new(circuit: &CircuitSpec, faults: BTreeMap<ComponentId, GateFault>) -> Result<Self, SequentialError> {
        for id in faults.keys() {
            if circuit.gate(id.as_str()).is_none() {
                return Err(SequentialError::UnknownComponent(id.to_string()));
            }
        }
        let inputs = circuit.observed_inputs()?;
        let values = circuit.evaluate_faulty(&inputs, &faults)?;
        for obs in &circuit.observations {
            if values.get(&obs.var) != Some(&obs.val) {
                return Err(SequentialError::WorldContradictsObservations(obs.to_string()));
            }
        }
        Ok(Self { faults, values })
    }

    /// The components this world makes faulty.
    pub fn actual(&self) -> Diagnosis {
        Diagnosis::new(self.faults.keys().cloned().collect())
    }

    pub fn value(&self, wire: &str) -> Result<bool, SequentialError> {
        self.values
            .get(wire)
            .copied()
            .ok_or_else(|| SequentialError::UndefinedWire(wire.to_string()))
    }
}

/// The true answer to `query` in the simulated world.
pub fn simulate_oracle(world: &SimulatedOracle, query: &Query) -> Result<AnswerValue, SequentialError> {
    let v = world.value(query.wire())?;
    Ok(AnswerValue::from(v == query.prop.val))
}

impl Oracle for SimulatedOracle {
    fn answer(&mut self, _state: &SessionState, query: &Query) -> Result<Answer, SequentialError> {
        Ok(Answer::simulated(simulate_oracle(self, query)?))
    }
}

/// Parses `G=fault,G=fault` with faults as accepted by [`GateFault`]'s
/// `FromStr` (for example `X1=stuck0,A2=invert,O1=and`).
pub fn parse_fault_spec(text: &str) -> Result<BTreeMap<ComponentId, GateFault>, SequentialError> {
    let mut out = BTreeMap::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (gate, fault) = part
            .split_once('=')
            .ok_or_else(|| SequentialError::InvalidFaultSpec(part.to_string()))?;
        let id = ComponentId::new(gate.trim()).map_err(|_| SequentialError::InvalidFaultSpec(part.to_string()))?;
        let fault: GateFault = fault
            .trim()
            .parse()
            .map_err(|_| SequentialError::InvalidFaultSpec(part.to_string()))?;
        out.insert(id, fault);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpi::WireValue;
    use crate::fixtures::full_adder_circuit;

    fn query(wire: &str) -> Query {
        Query {
            prop: WireValue::new(wire, true),
            dplus: vec![],
            dminus: vec![],
            dzero: vec![],
            p_yes: 0.5,
            scores: Default::default(),
        }
    }

    #[test]
    fn stuck_xor_answers_false() {
        let world = SimulatedOracle::new(&full_adder_circuit(), parse_fault_spec("X1=stuck0").unwrap()).unwrap();
        assert_eq!(simulate_oracle(&world, &query("X1")).unwrap(), AnswerValue::False);
        assert_eq!(world.actual(), Diagnosis::from_strs(&["X1"]));
    }

    #[test]
    fn double_fault_world() {
        let world =
            SimulatedOracle::new(&full_adder_circuit(), parse_fault_spec("X2=stuck1, O1=stuck0").unwrap()).unwrap();
        assert_eq!(simulate_oracle(&world, &query("A2")).unwrap(), AnswerValue::True);
        assert_eq!(simulate_oracle(&world, &query("sum")).unwrap(), AnswerValue::True);
        assert!(matches!(
            simulate_oracle(&world, &query("nope")),
            Err(SequentialError::UndefinedWire(_))
        ));
    }

    #[test]
    fn world_must_match_observations() {
        let err = SimulatedOracle::new(&full_adder_circuit(), parse_fault_spec("A1=stuck1").unwrap()).unwrap_err();
        assert!(matches!(err, SequentialError::WorldContradictsObservations(_)));
        assert!(parse_fault_spec("X1").is_err());
        assert!(parse_fault_spec("X1=melted").is_err());
    }
}
