//! Diagnosis problem instances.
//!
//! A [`Dpi`] bundles a propositional system description (clauses over wire
//! atoms and `ok(c)` normality atoms), the component set, unit observations,
//! unit measurements and per-component fault priors. Values are immutable
//! once built; adding a measurement yields a new instance.

mod circuit;
mod dsl;
mod encode;
mod json;
pub mod oracle;
pub mod random;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use circuit::{CircuitError, CircuitSpec, Gate, GateFault, GateKind};
pub use dsl::{parse_circuit_dsl, render_circuit_dsl, DslError, DslErrorKind};
pub use encode::{encode_circuit_to_dpi, gate_clauses, DEFAULT_PRIOR};
pub use json::{load_dpi_json, parse_dpi_json, save_dpi_json, to_dpi_json, JsonError};

/// Index of a component inside [`Dpi::components`].
pub type CompIdx = usize;

/// Identifier of a system component, e.g. `X1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ComponentId(String);

impl ComponentId {
    pub fn new(id: impl Into<String>) -> Result<Self, DpiError> {
        let id = id.into();
        if is_identifier(&id) {
            Ok(Self(id))
        } else {
            Err(DpiError::InvalidComponentId(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ComponentId {
    type Error = DpiError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<ComponentId> for String {
    fn from(value: ComponentId) -> Self {
        value.0
    }
}

impl std::str::FromStr for ComponentId {
    type Err = DpiError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for ComponentId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl std::borrow::Borrow<str> for ComponentId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// A propositional atom: either the value of a wire or the normality of a component.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Wire(String),
    Ok(ComponentId),
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Wire(w) => f.write_str(w),
            Atom::Ok(c) => write!(f, "ok:{c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub atom: Atom,
    pub negated: bool,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Self { atom, negated: false }
    }

    pub fn neg(atom: Atom) -> Self {
        Self { atom, negated: true }
    }

    pub fn wire(name: &str, value: bool) -> Self {
        Self {
            atom: Atom::Wire(name.to_string()),
            negated: !value,
        }
    }

    pub fn negate(&self) -> Self {
        Self {
            atom: self.atom.clone(),
            negated: !self.negated,
        }
    }
}

/// A disjunction of literals. The empty clause is explicit falsity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Clause(Vec<Literal>);

impl Clause {
    /// Builds a clause, dropping duplicate literals while keeping first-seen order.
    pub fn new(literals: impl IntoIterator<Item = Literal>) -> Self {
        let mut out: Vec<Literal> = Vec::new();
        for lit in literals {
            if !out.contains(&lit) {
                out.push(lit);
            }
        }
        Self(out)
    }

    pub fn unit(lit: Literal) -> Self {
        Self(vec![lit])
    }

    pub fn literals(&self) -> &[Literal] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A unit fact over a wire: `var = val`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WireValue {
    pub var: String,
    pub val: bool,
}

impl WireValue {
    pub fn new(var: impl Into<String>, val: bool) -> Self {
        Self {
            var: var.into(),
            val,
        }
    }

    pub fn literal(&self) -> Literal {
        Literal::wire(&self.var, self.val)
    }
}

impl fmt::Display for WireValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.var, u8::from(self.val))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DpiError {
    #[error("invalid component id {0:?}")]
    InvalidComponentId(String),
    #[error("duplicate component {0}")]
    DuplicateComponent(ComponentId),
    #[error("unknown component {0} in ok literal")]
    UnknownComponent(String),
    #[error("prior {prior} for {comp} is outside (0,1)")]
    PriorOutOfRange { comp: String, prior: f64 },
    #[error("observation or measurement over non-wire atom {0}")]
    NonWireFact(String),
    #[error("wire {0} is fixed to both 0 and 1")]
    ContradictoryFacts(String),
    #[error("invalid wire name {0:?}")]
    InvalidWire(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// A diagnosis problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Dpi {
    sd: Vec<Clause>,
    comps: Vec<ComponentId>,
    obs: Vec<WireValue>,
    meas: Vec<WireValue>,
    priors: Vec<f64>,
    wires: Vec<String>,
}

impl Dpi {
    /// Builds and validates an instance. Components are kept in sorted order;
    /// `priors` may omit components, which then receive [`DEFAULT_PRIOR`].
    pub fn new(
        sd: Vec<Clause>,
        comps: impl IntoIterator<Item = ComponentId>,
        obs: Vec<WireValue>,
        meas: Vec<WireValue>,
        priors: &BTreeMap<ComponentId, f64>,
    ) -> Result<Self, DpiError> {
        let mut comp_set = BTreeSet::new();
        for c in comps {
            if !comp_set.insert(c.clone()) {
                return Err(DpiError::DuplicateComponent(c));
            }
        }
        let comps: Vec<ComponentId> = comp_set.into_iter().collect();

        for key in priors.keys() {
            if comps.binary_search(key).is_err() {
                return Err(DpiError::UnknownComponent(key.to_string()));
            }
        }
        let priors: Vec<f64> = comps
            .iter()
            .map(|c| priors.get(c).copied().unwrap_or(DEFAULT_PRIOR))
            .collect();
        for (c, &p) in comps.iter().zip(&priors) {
            check_prior(c.as_str(), p)?;
        }

        let mut wires = BTreeSet::new();
        for clause in &sd {
            for lit in clause.literals() {
                match &lit.atom {
                    Atom::Ok(c) => {
                        if comps.binary_search(c).is_err() {
                            return Err(DpiError::UnknownComponent(c.to_string()));
                        }
                    }
                    Atom::Wire(w) => {
                        wires.insert(w.clone());
                    }
                }
            }
        }
        let mut fixed: BTreeMap<&str, bool> = BTreeMap::new();
        for fact in obs.iter().chain(&meas) {
            if !is_identifier(&fact.var) {
                return Err(DpiError::InvalidWire(fact.var.clone()));
            }
            if let Some(&prev) = fixed.get(fact.var.as_str()) {
                if prev != fact.val {
                    return Err(DpiError::ContradictoryFacts(fact.var.clone()));
                }
            }
            fixed.insert(&fact.var, fact.val);
            wires.insert(fact.var.clone());
        }

        Ok(Self {
            sd,
            comps,
            obs,
            meas,
            priors,
            wires: wires.into_iter().collect(),
        })
    }

    pub fn system_description(&self) -> &[Clause] {
        &self.sd
    }

    /// Components in canonical (sorted) order; positions are [`CompIdx`] values.
    pub fn components(&self) -> &[ComponentId] {
        &self.comps
    }

    pub fn num_components(&self) -> usize {
        self.comps.len()
    }

    pub fn component_index(&self, id: &str) -> Option<CompIdx> {
        self.comps.binary_search_by(|c| c.as_str().cmp(id)).ok()
    }

    pub fn observations(&self) -> &[WireValue] {
        &self.obs
    }

    pub fn measurements(&self) -> &[WireValue] {
        &self.meas
    }

    /// Every wire variable mentioned by the system description, observations or measurements.
    pub fn wires(&self) -> &[String] {
        &self.wires
    }

    pub fn prior(&self, comp: CompIdx) -> f64 {
        self.priors[comp]
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn prior_map(&self) -> BTreeMap<ComponentId, f64> {
        self.comps.iter().cloned().zip(self.priors.iter().copied()).collect()
    }

    /// The value a wire is fixed to by an observation or measurement.
    pub fn fixed_value(&self, wire: &str) -> Option<bool> {
        self.obs
            .iter()
            .chain(&self.meas)
            .find(|f| f.var == wire)
            .map(|f| f.val)
    }

    /// Returns a copy of this instance with one more measurement.
    pub fn with_measurement(&self, fact: WireValue) -> Result<Self, DpiError> {
        if let Some(prev) = self.fixed_value(&fact.var) {
            if prev != fact.val {
                return Err(DpiError::ContradictoryFacts(fact.var));
            }
        }
        let mut next = self.clone();
        if !next.wires.contains(&fact.var) {
            let pos = next.wires.binary_search(&fact.var).unwrap_err();
            next.wires.insert(pos, fact.var.clone());
        }
        next.meas.push(fact);
        Ok(next)
    }

    /// Returns a copy with the given priors replaced.
    pub fn with_priors(&self, priors: &BTreeMap<ComponentId, f64>) -> Result<Self, DpiError> {
        let mut next = self.clone();
        for (c, &p) in priors {
            let idx = self
                .component_index(c.as_str())
                .ok_or_else(|| DpiError::UnknownComponent(c.to_string()))?;
            check_prior(c.as_str(), p)?;
            next.priors[idx] = p;
        }
        Ok(next)
    }

    pub fn ids(&self, idxs: &[CompIdx]) -> Vec<ComponentId> {
        idxs.iter().map(|&i| self.comps[i].clone()).collect()
    }

    /// Resolves component ids to indices; unknown ids are reported.
    pub fn indices<S: AsRef<str>>(&self, ids: &[S]) -> Result<Vec<CompIdx>, DpiError> {
        ids.iter()
            .map(|id| {
                self.component_index(id.as_ref())
                    .ok_or_else(|| DpiError::UnknownComponent(id.as_ref().to_string()))
            })
            .collect()
    }
}

fn check_prior(comp: &str, p: f64) -> Result<(), DpiError> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(DpiError::PriorOutOfRange {
            comp: comp.to_string(),
            prior: p,
        })
    }
}

/// The set of components assumed to behave normally.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ModeAssignment {
    pub normal: BTreeSet<ComponentId>,
}

impl ModeAssignment {
    pub fn all_normal(dpi: &Dpi) -> Self {
        Self {
            normal: dpi.components().iter().cloned().collect(),
        }
    }

    /// All components normal except those in `abnormal`.
    pub fn all_but(dpi: &Dpi, abnormal: &[ComponentId]) -> Self {
        Self {
            normal: dpi
                .components()
                .iter()
                .filter(|c| !abnormal.contains(c))
                .cloned()
                .collect(),
        }
    }

    pub fn from_ids<S: AsRef<str>>(ids: &[S]) -> Result<Self, DpiError> {
        let normal = ids
            .iter()
            .map(|s| ComponentId::new(s.as_ref()))
            .collect::<Result<_, _>>()?;
        Ok(Self { normal })
    }
}

/// Helper for building component ids from string literals in fixtures and tests.
pub fn comp_ids<S: AsRef<str>>(ids: &[S]) -> Vec<ComponentId> {
    ids.iter()
        .map(|s| ComponentId::new(s.as_ref()).expect("valid component id"))
        .collect()
}
