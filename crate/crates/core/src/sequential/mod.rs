//! Sequential diagnosis: ask for measurements until one explanation is left
//! or one is probable enough.
//!
//! A session keeps a small set of leading minimal diagnoses with normalized
//! posteriors, proposes the measurement that best discriminates between them
//! and folds each answer back in. In dynamic mode answers become measurements
//! of an evolving instance and the leading set is replenished from the new
//! instance; in static mode answers only filter the initial set.

mod oracle;
mod query;
mod session;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dpi::{CircuitError, DpiError};
use crate::hitting_set::{SampleError, SamplingStrategy};
use crate::msmp::Diagnosis;

pub use oracle::{parse_fault_spec, simulate_oracle, Oracle, SimulatedOracle};
pub use query::{generate_query_candidates, measurable_wires, partition_query, score_query, select_query, Query};
pub use session::{run_session, HistoryEntry, SessionState, StopReason, Transcript, TranscriptRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Heuristic {
    /// Expected entropy after the answer (minimized).
    #[default]
    Ent,
    /// Split-in-half (minimized).
    Spl,
    /// Most probable singleton elimination (maximized).
    Mps,
    /// Biased maximal elimination (maximized).
    Bme,
    /// Expected elimination count (maximized).
    Emcb,
    /// Seeded random choice.
    Rnd,
}

impl Heuristic {
    pub const ALL: [Heuristic; 6] = [Self::Ent, Self::Spl, Self::Mps, Self::Bme, Self::Emcb, Self::Rnd];
    pub(crate) const DETERMINISTIC: [Heuristic; 5] = [Self::Ent, Self::Spl, Self::Mps, Self::Bme, Self::Emcb];

    pub fn maximize(self) -> bool {
        matches!(self, Self::Mps | Self::Bme | Self::Emcb | Self::Rnd)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ent => "ent",
            Self::Spl => "spl",
            Self::Mps => "mps",
            Self::Bme => "bme",
            Self::Emcb => "emcb",
            Self::Rnd => "rnd",
        }
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Heuristic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|h| h.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown heuristic {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SessionMode {
    #[default]
    Dynamic,
    Static,
}

impl std::str::FromStr for SessionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dynamic" => Ok(Self::Dynamic),
            "static" => Ok(Self::Static),
            other => Err(format!("unknown session mode {other:?}")),
        }
    }
}

/// How leading diagnoses are weighted before normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PosteriorModel {
    /// Proportional to the prior product of each diagnosis.
    #[default]
    Prior,
    /// Equal weight for every leading diagnosis.
    Uniform,
}

impl std::str::FromStr for PosteriorModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "prior" => Ok(Self::Prior),
            "uniform" => Ok(Self::Uniform),
            other => Err(format!("unknown posterior model {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    /// Size of the leading diagnosis sample.
    pub k: usize,
    /// Stop once some leading diagnosis reaches this posterior.
    pub sigma: f64,
    /// Stop after this many answered queries.
    pub max_queries: usize,
    pub heuristic: Heuristic,
    pub mode: SessionMode,
    pub sampler: SamplingStrategy,
    pub posterior: PosteriorModel,
    pub seed: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            k: 5,
            sigma: 0.95,
            max_queries: 50,
            heuristic: Heuristic::Ent,
            mode: SessionMode::Dynamic,
            sampler: SamplingStrategy::BestFirst,
            posterior: PosteriorModel::Prior,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerValue {
    True,
    False,
    Skip,
}

impl From<bool> for AnswerValue {
    fn from(b: bool) -> Self {
        if b {
            Self::True
        } else {
            Self::False
        }
    }
}

impl AnswerValue {
    pub fn as_bool(self) -> Option<bool> {
        match self {
            Self::True => Some(true),
            Self::False => Some(false),
            Self::Skip => None,
        }
    }
}

impl fmt::Display for AnswerValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::True => "true",
            Self::False => "false",
            Self::Skip => "skip",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AnswerSource {
    #[default]
    Human,
    Simulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub value: AnswerValue,
    #[serde(default)]
    pub source: AnswerSource,
}

impl Answer {
    pub fn human(value: AnswerValue) -> Self {
        Self {
            value,
            source: AnswerSource::Human,
        }
    }

    pub fn simulated(value: AnswerValue) -> Self {
        Self {
            value,
            source: AnswerSource::Simulated,
        }
    }
}

#[derive(Debug, Error)]
pub enum SequentialError {
    #[error("query generation needs at least two leading diagnoses, have {0}")]
    TooFewDiagnoses(usize),
    #[error("no measurable wire discriminates between the leading diagnoses")]
    NoDiscriminatingQuery,
    #[error("the answer contradicts every diagnosis of the initial set")]
    AnswerContradictsAllDiagnoses,
    #[error("the instance has no diagnosis")]
    NoDiagnosis,
    #[error("{0} is not a diagnosis of the current instance")]
    NotADiagnosis(Diagnosis),
    #[error("the session has stopped")]
    Stopped,
    #[error("there is no pending query")]
    NoPendingQuery,
    #[error("wire {0:?} cannot be measured")]
    UnknownWire(String),
    #[error("wire {0:?} is not defined by the simulated circuit")]
    UndefinedWire(String),
    #[error("unknown component {0:?}")]
    UnknownComponent(String),
    #[error("invalid fault specification {0:?}; expected GATE=stuck0|stuck1|invert|<kind>")]
    InvalidFaultSpec(String),
    #[error("the faulted circuit contradicts observation {0}")]
    WorldContradictsObservations(String),
    #[error(transparent)]
    Dpi(#[from] DpiError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Sample(#[from] SampleError),
}
