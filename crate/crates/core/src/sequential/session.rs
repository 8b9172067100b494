//! Session state machine and the driver loop.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::query::{generate_query_candidates, measurable_wires, partition_query, select_query, Query};
use super::{Answer, AnswerValue, Oracle, PosteriorModel, SequentialError, SessionConfig, SessionMode};
use crate::dpi::{ComponentId, Dpi, WireValue};
use crate::hitting_set::{prior_product, sample_diagnoses, SampleError};
use crate::msmp::Diagnosis;
use crate::reasoner::DpllReasoner;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    SingleRemaining,
    Threshold,
    Budget,
    NoDiscriminatingQuery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub query: Query,
    pub answer: Answer,
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
}

/// One line of a session transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub step: usize,
    /// The proposition asked, e.g. `A2=1`.
    pub query: String,
    /// `[|D+|, |D-|, |D0|]`.
    pub partition_sizes: [usize; 3],
    pub scores: BTreeMap<String, f64>,
    pub answer: AnswerValue,
    pub eliminated: Vec<Vec<ComponentId>>,
    pub remaining: Vec<Vec<ComponentId>>,
    pub posteriors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub records: Vec<TranscriptRecord>,
    pub stop: Option<StopReason>,
    pub queries_answered: usize,
    pub final_diagnoses: Vec<Diagnosis>,
    /// False when the query budget ran out before a conclusion.
    pub complete: bool,
}

impl Transcript {
    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
            .collect()
    }
}

/// A running session. Mutations go through [`SessionState::answer`] and
/// [`SessionState::propose`]; everything else is a read.
#[derive(Debug, Clone)]
pub struct SessionState {
    dpi: Dpi,
    config: SessionConfig,
    leading: Vec<Diagnosis>,
    initial_leading: Vec<Diagnosis>,
    history: Vec<HistoryEntry>,
    records: Vec<TranscriptRecord>,
    unavailable: BTreeSet<String>,
    stop: Option<StopReason>,
    current: Option<Query>,
    proposals: u64,
    answered: usize,
}

impl SessionState {
    /// Samples the initial leading diagnoses and proposes the first query.
    pub fn new(dpi: Dpi, config: SessionConfig) -> Result<Self, SequentialError> {
        let leading = sample(&dpi, &config, config.k.max(1))?;
        let mut state = Self {
            initial_leading: leading.clone(),
            leading,
            dpi,
            config,
            history: Vec::new(),
            records: Vec::new(),
            unavailable: BTreeSet::new(),
            stop: None,
            current: None,
            proposals: 0,
            answered: 0,
        };
        state.normalize();
        state.initial_leading = state.leading.clone();
        state.refresh();
        Ok(state)
    }

    pub fn dpi(&self) -> &Dpi {
        &self.dpi
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    /// Leading diagnoses; `prob` holds the normalized posterior.
    pub fn leading(&self) -> &[Diagnosis] {
        &self.leading
    }

    pub fn posteriors(&self) -> Vec<f64> {
        self.leading.iter().map(|d| d.prob).collect()
    }

    pub fn initial_leading(&self) -> &[Diagnosis] {
        &self.initial_leading
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    pub fn records(&self) -> &[TranscriptRecord] {
        &self.records
    }

    pub fn stop_reason(&self) -> Option<StopReason> {
        self.stop
    }

    pub fn is_stopped(&self) -> bool {
        self.stop.is_some()
    }

    pub fn queries_answered(&self) -> usize {
        self.answered
    }

    pub fn current_query(&self) -> Option<&Query> {
        self.current.as_ref()
    }

    /// Token identifying the pending query; answers must echo it.
    pub fn query_token(&self) -> Option<String> {
        self.current.as_ref().map(|q| format!("{}-{}", self.proposals, q.wire()))
    }

    pub fn unavailable_wires(&self) -> &BTreeSet<String> {
        &self.unavailable
    }

    /// Diagnoses to report: the survivors once stopped, else the leading set.
    pub fn final_diagnoses(&self) -> Vec<Diagnosis> {
        self.leading.clone()
    }

    pub fn transcript(&self) -> Transcript {
        Transcript {
            records: self.records.clone(),
            stop: self.stop,
            queries_answered: self.answered,
            final_diagnoses: self.final_diagnoses(),
            complete: self.stop.is_some() && self.stop != Some(StopReason::Budget),
        }
    }

    /// Replaces the pending query with a measurement of `wire`, whether or
    /// not it discriminates.
    pub fn propose(&mut self, wire: &str) -> Result<&Query, SequentialError> {
        if self.stop.is_some() {
            return Err(SequentialError::Stopped);
        }
        if !measurable_wires(&self.dpi, &self.unavailable).iter().any(|w| w == wire) {
            return Err(SequentialError::UnknownWire(wire.to_string()));
        }
        let mut reasoner = DpllReasoner::new(&self.dpi);
        let q = partition_query(&self.dpi, &mut reasoner, &self.leading, &self.posteriors(), wire)?;
        self.proposals += 1;
        Ok(self.current.insert(q))
    }

    /// Applies `answer` to the pending query and proposes the next one.
    pub fn answer(&mut self, answer: Answer) -> Result<&TranscriptRecord, SequentialError> {
        if self.stop.is_some() {
            return Err(SequentialError::Stopped);
        }
        let q = self.current.clone().ok_or(SequentialError::NoPendingQuery)?;
        let eliminated: Vec<Diagnosis> = match answer.value.as_bool() {
            None => {
                self.unavailable.insert(q.wire().to_string());
                Vec::new()
            }
            Some(v) => self.apply_measurement(&q, v)?,
        };
        self.history.push(HistoryEntry {
            query: q.clone(),
            answer,
            timestamp_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_millis() as u64),
        });
        self.records.push(TranscriptRecord {
            step: self.history.len(),
            query: q.prop.to_string(),
            partition_sizes: q.partition_sizes(),
            scores: q.scores.iter().map(|(h, s)| (h.to_string(), *s)).collect(),
            answer: answer.value,
            eliminated: eliminated.into_iter().map(|d| d.comps).collect(),
            remaining: self.leading.iter().map(|d| d.comps.clone()).collect(),
            posteriors: self.posteriors(),
        });
        self.current = None;
        self.refresh();
        Ok(self.records.last().expect("just pushed"))
    }

    fn apply_measurement(&mut self, q: &Query, value: bool) -> Result<Vec<Diagnosis>, SequentialError> {
        let new_dpi = self.dpi.with_measurement(WireValue::new(q.wire(), value))?;
        let doomed: BTreeSet<usize> = q.eliminated_by(value).iter().copied().collect();
        let (gone, kept): (Vec<_>, Vec<_>) = self
            .leading
            .iter()
            .cloned()
            .enumerate()
            .partition(|(i, _)| doomed.contains(i));
        let eliminated: Vec<Diagnosis> = gone.into_iter().map(|(_, d)| d).collect();
        let mut survivors: Vec<Diagnosis> = kept.into_iter().map(|(_, d)| d).collect();
        match self.config.mode {
            SessionMode::Static => {
                if survivors.is_empty() {
                    return Err(SequentialError::AnswerContradictsAllDiagnoses);
                }
            }
            SessionMode::Dynamic => {
                let k = self.config.k.max(1);
                if survivors.len() < k {
                    let fresh = sample(&new_dpi, &self.config, k + survivors.len())?;
                    for d in fresh {
                        if survivors.len() >= k {
                            break;
                        }
                        if !survivors.contains(&d) {
                            survivors.push(d);
                        }
                    }
                }
                if survivors.is_empty() {
                    return Err(SequentialError::NoDiagnosis);
                }
            }
        }
        self.dpi = new_dpi;
        self.leading = survivors;
        self.normalize();
        self.answered += 1;
        Ok(eliminated)
    }

    fn normalize(&mut self) {
        let weights: Vec<f64> = match self.config.posterior {
            PosteriorModel::Uniform => vec![1.0; self.leading.len()],
            PosteriorModel::Prior => self
                .leading
                .iter()
                .map(|d| prior_product(&self.dpi, &d.indices(&self.dpi)))
                .collect(),
        };
        let total: f64 = weights.iter().sum();
        let n = self.leading.len() as f64;
        for (d, w) in self.leading.iter_mut().zip(weights) {
            d.prob = if total > 0.0 { w / total } else { 1.0 / n };
        }
    }

    fn refresh(&mut self) {
        if self.stop.is_some() {
            return;
        }
        let max_post = self.leading.iter().map(|d| d.prob).fold(0.0, f64::max);
        self.stop = if self.leading.len() <= 1 {
            Some(StopReason::SingleRemaining)
        } else if max_post >= self.config.sigma {
            Some(StopReason::Threshold)
        } else if self.answered >= self.config.max_queries {
            Some(StopReason::Budget)
        } else {
            None
        };
        if self.stop.is_some() {
            return;
        }
        let candidates = generate_query_candidates(
            &self.dpi,
            &self.leading,
            &self.posteriors(),
            &self.unavailable,
            self.config.seed,
            self.proposals,
        );
        match candidates {
            Ok(qs) => {
                self.current = select_query(&qs, self.config.heuristic).cloned();
                self.proposals += 1;
            }
            Err(_) => self.stop = Some(StopReason::NoDiscriminatingQuery),
        }
    }
}

/// Draws up to `k` diagnoses with the configured sampler. Random sampling
/// that hits its retry cap keeps what it found.
fn sample(dpi: &Dpi, config: &SessionConfig, k: usize) -> Result<Vec<Diagnosis>, SequentialError> {
    let found = match sample_diagnoses(dpi, config.sampler, k, config.seed, None) {
        Ok(ds) => ds,
        Err(SampleError::RetryCapExceeded { found, .. }) => found,
        Err(e) => return Err(e.into()),
    };
    if found.is_empty() {
        return Err(SequentialError::NoDiagnosis);
    }
    Ok(found)
}

/// Runs a session to its stop criterion, asking `oracle` for every answer.
pub fn run_session(dpi: Dpi, config: SessionConfig, oracle: &mut dyn Oracle) -> Result<Transcript, SequentialError> {
    let mut state = SessionState::new(dpi, config)?;
    while let Some(q) = state.current_query().cloned() {
        let answer = oracle.answer(&state, &q)?;
        state.answer(answer)?;
    }
    Ok(state.transcript())
}
