use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ComponentId, WireValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    And,
    Or,
    Xor,
    Not,
    Buf,
}

impl GateKind {
    pub const ALL: [GateKind; 5] = [GateKind::And, GateKind::Or, GateKind::Xor, GateKind::Not, GateKind::Buf];

    /// Normal (fault-free) output for the given input values.
    pub fn apply(self, inputs: &[bool]) -> bool {
        match self {
            GateKind::And => inputs.iter().all(|&b| b),
            GateKind::Or => inputs.iter().any(|&b| b),
            GateKind::Xor => inputs.iter().fold(false, |acc, &b| acc ^ b),
            GateKind::Not => !inputs[0],
            GateKind::Buf => inputs[0],
        }
    }

    pub fn is_unary(self) -> bool {
        matches!(self, GateKind::Not | GateKind::Buf)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GateKind::And => "and",
            GateKind::Or => "or",
            GateKind::Xor => "xor",
            GateKind::Not => "not",
            GateKind::Buf => "buf",
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GateKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GateKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown gate kind {s:?}"))
    }
}

/// Concrete misbehaviour of a faulty gate in a simulated world.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "value")]
pub enum GateFault {
    StuckAt(bool),
    Inverted,
    Kind(GateKind),
}

impl GateFault {
    pub fn apply(self, kind: GateKind, inputs: &[bool]) -> bool {
        match self {
            GateFault::StuckAt(v) => v,
            GateFault::Inverted => !kind.apply(inputs),
            GateFault::Kind(k) if k.is_unary() => k.apply(&inputs[..1]),
            GateFault::Kind(k) => k.apply(inputs),
        }
    }
}

impl fmt::Display for GateFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateFault::StuckAt(v) => write!(f, "stuck{}", u8::from(*v)),
            GateFault::Inverted => f.write_str("invert"),
            GateFault::Kind(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for GateFault {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stuck0" => Ok(GateFault::StuckAt(false)),
            "stuck1" => Ok(GateFault::StuckAt(true)),
            "invert" => Ok(GateFault::Inverted),
            other => other
                .parse::<GateKind>()
                .map(GateFault::Kind)
                .map_err(|_| format!("unknown fault {other:?} (expected stuck0, stuck1, invert or a gate kind)")),
        }
    }
}

/// Max fan-in for xor gates; the encoding enumerates input parities.
pub const MAX_XOR_ARITY: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gate {
    pub id: ComponentId,
    pub kind: GateKind,
    pub out: String,
    pub inputs: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CircuitError {
    #[error("duplicate gate id {0}")]
    DuplicateGate(String),
    #[error("wire {0} is driven more than once")]
    MultipleDrivers(String),
    #[error("undeclared variable {0}")]
    UndeclaredVariable(String),
    #[error("combinational cycle through gate {0}")]
    Cycle(String),
    #[error("gate {gate}: {kind} takes {expected} input(s), got {got}")]
    Arity {
        gate: String,
        kind: GateKind,
        expected: &'static str,
        got: usize,
    },
    #[error("missing value for input {0}")]
    MissingInput(String),
}

/// A combinational gate netlist with bound observations and optional prior overrides.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CircuitSpec {
    pub name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub gates: Vec<Gate>,
    pub observations: Vec<WireValue>,
    pub priors: BTreeMap<ComponentId, f64>,
    pub kind_priors: BTreeMap<GateKind, f64>,
}

impl CircuitSpec {
    /// Checks structural validity and returns gate indices in topological order.
    pub fn validate(&self) -> Result<Vec<usize>, CircuitError> {
        let mut ids = HashSet::new();
        let mut driven: HashMap<&str, usize> = HashMap::new();
        for w in &self.inputs {
            if driven.insert(w.as_str(), usize::MAX).is_some() {
                return Err(CircuitError::MultipleDrivers(w.clone()));
            }
        }
        for (i, g) in self.gates.iter().enumerate() {
            if !ids.insert(g.id.as_str()) {
                return Err(CircuitError::DuplicateGate(g.id.to_string()));
            }
            if driven.insert(g.out.as_str(), i).is_some() {
                return Err(CircuitError::MultipleDrivers(g.out.clone()));
            }
            let n = g.inputs.len();
            let bad = if g.kind.is_unary() { n != 1 } else { n < 2 || (g.kind == GateKind::Xor && n > MAX_XOR_ARITY) };
            if bad {
                return Err(CircuitError::Arity {
                    gate: g.id.to_string(),
                    kind: g.kind,
                    expected: if g.kind.is_unary() { "exactly 1" } else { "2 or more" },
                    got: n,
                });
            }
        }
        for g in &self.gates {
            for w in &g.inputs {
                if !driven.contains_key(w.as_str()) {
                    return Err(CircuitError::UndeclaredVariable(w.clone()));
                }
            }
        }
        for w in self.outputs.iter().chain(self.observations.iter().map(|o| &o.var)) {
            if !driven.contains_key(w.as_str()) {
                return Err(CircuitError::UndeclaredVariable(w.clone()));
            }
        }

        // Kahn's algorithm, stable w.r.t. declaration order.
        let mut indegree: Vec<usize> = self
            .gates
            .iter()
            .map(|g| g.inputs.iter().filter(|w| driven[w.as_str()] != usize::MAX).count())
            .collect();
        let mut fanout: Vec<Vec<usize>> = vec![Vec::new(); self.gates.len()];
        for (i, g) in self.gates.iter().enumerate() {
            for w in &g.inputs {
                let src = driven[w.as_str()];
                if src != usize::MAX {
                    fanout[src].push(i);
                }
            }
        }
        let mut order = Vec::with_capacity(self.gates.len());
        let mut ready: std::collections::BTreeSet<usize> =
            (0..self.gates.len()).filter(|&i| indegree[i] == 0).collect();
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for &j in &fanout[i] {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.insert(j);
                }
            }
        }
        if order.len() != self.gates.len() {
            let stuck = (0..self.gates.len()).find(|i| !order.contains(i)).unwrap();
            return Err(CircuitError::Cycle(self.gates[stuck].id.to_string()));
        }
        Ok(order)
    }

    pub fn gate(&self, id: &str) -> Option<&Gate> {
        self.gates.iter().find(|g| g.id.as_str() == id)
    }

    /// Input values taken from the observation bindings.
    pub fn observed_inputs(&self) -> Result<BTreeMap<String, bool>, CircuitError> {
        self.inputs
            .iter()
            .map(|w| {
                self.observations
                    .iter()
                    .find(|o| &o.var == w)
                    .map(|o| (w.clone(), o.val))
                    .ok_or_else(|| CircuitError::MissingInput(w.clone()))
            })
            .collect()
    }

    /// Evaluates every wire. `gate_fn` computes each gate's output from its
    /// input values; pass `|g, v| g.kind.apply(v)` for the fault-free circuit.
    pub fn evaluate_with(
        &self,
        inputs: &BTreeMap<String, bool>,
        mut gate_fn: impl FnMut(&Gate, &[bool]) -> bool,
    ) -> Result<BTreeMap<String, bool>, CircuitError> {
        let order = self.validate()?;
        let mut values = BTreeMap::new();
        for w in &self.inputs {
            let v = *inputs.get(w).ok_or_else(|| CircuitError::MissingInput(w.clone()))?;
            values.insert(w.clone(), v);
        }
        let mut buf = Vec::new();
        for i in order {
            let g = &self.gates[i];
            buf.clear();
            buf.extend(g.inputs.iter().map(|w| values[w]));
            let out = gate_fn(g, &buf);
            values.insert(g.out.clone(), out);
        }
        Ok(values)
    }

    pub fn evaluate(&self, inputs: &BTreeMap<String, bool>) -> Result<BTreeMap<String, bool>, CircuitError> {
        self.evaluate_with(inputs, |g, v| g.kind.apply(v))
    }

    /// Evaluates the circuit with the listed gates replaced by their faulty behaviour.
    pub fn evaluate_faulty(
        &self,
        inputs: &BTreeMap<String, bool>,
        faults: &BTreeMap<ComponentId, GateFault>,
    ) -> Result<BTreeMap<String, bool>, CircuitError> {
        self.evaluate_with(inputs, |g, v| match faults.get(&g.id) {
            Some(f) => f.apply(g.kind, v),
            None => g.kind.apply(v),
        })
    }
}
