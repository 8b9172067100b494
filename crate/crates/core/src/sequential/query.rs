//! Measurement-point queries: partitioning, scoring and selection.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Heuristic, SequentialError};
use crate::dpi::{Dpi, WireValue};
use crate::msmp::Diagnosis;
use crate::reasoner::{entails, DpllReasoner, Entailment};

/// Scores closer than this are treated as equal when selecting.
const SCORE_TIE_EPS: f64 = 1e-12;

/// A proposition `wire=1` together with how the leading diagnoses predict it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub prop: WireValue,
    /// Indices into the leading set of diagnoses predicting `prop`.
    pub dplus: Vec<usize>,
    /// Indices of diagnoses predicting its negation.
    pub dminus: Vec<usize>,
    /// Indices of diagnoses predicting neither.
    pub dzero: Vec<usize>,
    pub p_yes: f64,
    pub scores: BTreeMap<Heuristic, f64>,
}

impl Query {
    pub fn wire(&self) -> &str {
        &self.prop.var
    }

    pub fn is_discriminating(&self) -> bool {
        !self.dplus.is_empty() && !self.dminus.is_empty()
    }

    pub fn p_no(&self) -> f64 {
        1.0 - self.p_yes
    }

    pub fn partition_sizes(&self) -> [usize; 3] {
        [self.dplus.len(), self.dminus.len(), self.dzero.len()]
    }

    /// Indices eliminated by answering `value`.
    pub fn eliminated_by(&self, value: bool) -> &[usize] {
        if value {
            &self.dminus
        } else {
            &self.dplus
        }
    }
}

/// Partitions `leading` by what each diagnosis predicts for `wire=1`.
/// Two consistency checks per diagnosis.
pub fn partition_query(
    dpi: &Dpi,
    reasoner: &mut DpllReasoner,
    leading: &[Diagnosis],
    posteriors: &[f64],
    wire: &str,
) -> Result<Query, SequentialError> {
    let prop = WireValue::new(wire, true);
    let (mut dplus, mut dminus, mut dzero) = (Vec::new(), Vec::new(), Vec::new());
    for (i, d) in leading.iter().enumerate() {
        let abnormal = d.indices(dpi);
        let normal: Vec<usize> = (0..dpi.num_components()).filter(|c| !abnormal.contains(c)).collect();
        match entails(reasoner, &normal, &prop).map_err(|_| SequentialError::NotADiagnosis(d.clone()))? {
            Entailment::Yes => dplus.push(i),
            Entailment::No => dminus.push(i),
            Entailment::Unknown => dzero.push(i),
        }
    }
    let mass = |idx: &[usize]| idx.iter().map(|&i| posteriors[i]).sum::<f64>();
    let p_yes = (mass(&dplus) + 0.5 * mass(&dzero)).clamp(0.0, 1.0);
    let mut q = Query {
        prop,
        dplus,
        dminus,
        dzero,
        p_yes,
        scores: BTreeMap::new(),
    };
    for h in Heuristic::DETERMINISTIC {
        q.scores.insert(h, score_query(&q, h, posteriors));
    }
    Ok(q)
}

/// Wires that can still be measured: neither observed, measured nor skipped.
pub fn measurable_wires(dpi: &Dpi, unavailable: &BTreeSet<String>) -> Vec<String> {
    dpi.wires()
        .iter()
        .filter(|w| dpi.fixed_value(w).is_none() && !unavailable.contains(*w))
        .cloned()
        .collect()
}

/// All discriminating queries over measurable wires, in wire order. The
/// random heuristic's score is drawn from ChaCha8 seeded with `seed` on
/// stream `step`, one draw per candidate in wire order.
pub fn generate_query_candidates(
    dpi: &Dpi,
    leading: &[Diagnosis],
    posteriors: &[f64],
    unavailable: &BTreeSet<String>,
    seed: u64,
    step: u64,
) -> Result<Vec<Query>, SequentialError> {
    if leading.len() < 2 {
        return Err(SequentialError::TooFewDiagnoses(leading.len()));
    }
    let mut reasoner = DpllReasoner::new(dpi);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step);
    let mut out = Vec::new();
    for wire in measurable_wires(dpi, unavailable) {
        let mut q = partition_query(dpi, &mut reasoner, leading, posteriors, &wire)?;
        if q.is_discriminating() {
            q.scores.insert(Heuristic::Rnd, rng.gen::<f64>());
            out.push(q);
        }
    }
    if out.is_empty() {
        return Err(SequentialError::NoDiscriminatingQuery);
    }
    Ok(out)
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

/// Scores `q` under `heuristic`. `Rnd` has no closed form and scores 0 here;
/// candidate generation attaches its seeded draw.
pub fn score_query(q: &Query, heuristic: Heuristic, posteriors: &[f64]) -> f64 {
    let p_yes = q.p_yes;
    let p_no = q.p_no();
    let (n_plus, n_minus) = (q.dplus.len() as f64, q.dminus.len() as f64);
    match heuristic {
        Heuristic::Ent => {
            let p_zero: f64 = q.dzero.iter().map(|&i| posteriors[i]).sum();
            plogp(p_yes) + plogp(p_no) + p_zero + 1.0
        }
        Heuristic::Spl => (n_plus - n_minus).abs() + q.dzero.len() as f64,
        Heuristic::Mps => {
            // Answer "yes" eliminates D-, answer "no" eliminates D+.
            if n_minus > n_plus || (n_minus == n_plus && p_yes >= p_no) {
                p_yes
            } else {
                p_no
            }
        }
        Heuristic::Bme => {
            if p_yes > 0.5 {
                n_minus
            } else if p_no > 0.5 {
                n_plus
            } else {
                0.0
            }
        }
        Heuristic::Emcb => p_yes * n_minus + p_no * n_plus,
        Heuristic::Rnd => 0.0,
    }
}

/// Best candidate under `heuristic`; ties go to the smallest wire name.
pub fn select_query(candidates: &[Query], heuristic: Heuristic) -> Option<&Query> {
    let sign = if heuristic.maximize() { -1.0 } else { 1.0 };
    let mut best: Option<(&Query, f64)> = None;
    for q in candidates {
        let s = sign * q.scores.get(&heuristic).copied().unwrap_or(0.0);
        best = match best {
            None => Some((q, s)),
            Some((b, bs)) => {
                let better = s < bs - SCORE_TIE_EPS || ((s - bs).abs() <= SCORE_TIE_EPS && q.wire() < b.wire());
                if better {
                    Some((q, s))
                } else {
                    Some((b, bs))
                }
            }
        };
    }
    best.map(|(q, _)| q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::full_adder;

    fn leading() -> Vec<Diagnosis> {
        vec![
            Diagnosis::from_strs(&["X1"]),
            Diagnosis::from_strs(&["A2", "X2"]),
            Diagnosis::from_strs(&["O1", "X2"]),
        ]
    }

    #[test]
    fn full_adder_candidates() {
        let dpi = full_adder();
        let uniform = vec![1.0 / 3.0; 3];
        let qs = generate_query_candidates(&dpi, &leading(), &uniform, &BTreeSet::new(), 0, 0).unwrap();
        let wires: Vec<&str> = qs.iter().map(|q| q.wire()).collect();
        assert_eq!(wires, ["A2", "X1"]);
        assert_eq!((qs[0].dplus.clone(), qs[0].dminus.clone()), (vec![2], vec![0, 1]));
        assert_eq!((qs[1].dplus.clone(), qs[1].dminus.clone()), (vec![1, 2], vec![0]));
        for h in [Heuristic::Ent, Heuristic::Spl] {
            assert_eq!(select_query(&qs, h).unwrap().wire(), "A2");
        }
    }

    #[test]
    fn perfect_split_scores_zero() {
        let q = Query {
            prop: WireValue::new("w", true),
            dplus: vec![0],
            dminus: vec![1],
            dzero: vec![],
            p_yes: 0.5,
            scores: BTreeMap::new(),
        };
        let post = [0.5, 0.5];
        assert_eq!(score_query(&q, Heuristic::Spl, &post), 0.0);
        assert!(score_query(&q, Heuristic::Ent, &post).abs() < 1e-15);
    }

    #[test]
    fn too_few_and_no_query() {
        let dpi = full_adder();
        let one = vec![Diagnosis::from_strs(&["X1"])];
        assert!(matches!(
            generate_query_candidates(&dpi, &one, &[1.0], &BTreeSet::new(), 0, 0),
            Err(SequentialError::TooFewDiagnoses(1))
        ));
        let all: BTreeSet<String> = dpi.wires().iter().cloned().collect();
        assert!(matches!(
            generate_query_candidates(&dpi, &leading(), &[1.0 / 3.0; 3], &all, 0, 0),
            Err(SequentialError::NoDiscriminatingQuery)
        ));
    }

    #[test]
    fn random_scores_are_seeded() {
        let dpi = full_adder();
        let gen = |seed| generate_query_candidates(&dpi, &leading(), &[1.0 / 3.0; 3], &BTreeSet::new(), seed, 0).unwrap();
        let pick = |qs: &[Query]| select_query(qs, Heuristic::Rnd).unwrap().wire().to_string();
        assert_eq!(pick(&gen(5)), pick(&gen(5)));
        assert_eq!(gen(5)[0].scores[&Heuristic::Rnd], gen(5)[0].scores[&Heuristic::Rnd]);
    }
}
