//! Candidate evaluation: per-item outcomes and the bi-objective fitness.
//!
//! Two evaluators ship with the crate. [`SimulatedEvaluator`] answers from a
//! synthetic item-response benchmark indexed by the interpolation coefficient.
//! [`RecordEvaluator`] replays outcomes produced by an external harness and
//! stored as JSONL records.

mod records;
mod simulated;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::merge::Genotype;

pub use records::{load_record_evaluations, RecordEvaluator, RecordLine, RecordSet};
pub use simulated::{
    evaluate_simulated, logistic_response, GeneratorConfig, ResponseKind, SimItem, SimulatedBenchmark,
    SimulatedEvaluator,
};
pub(crate) use simulated::accuracy_at as simulated_accuracy;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown item id {0:?}")]
    UnknownItem(String),
    #[error("cannot compute objectives from an empty outcome list")]
    EmptyOutcomes,
    #[error("invalid item {item:?}: {reason}")]
    InvalidItem { item: String, reason: String },
    #[error("duplicate item id {0:?}")]
    DuplicateItem(String),
    #[error("{0}")]
    UnsupportedGenotype(String),
    #[error("no records for candidate {0:?}")]
    MissingCandidate(String),
    #[error("candidate {candidate:?} has no record for item {item:?}")]
    MissingItem { candidate: String, item: String },
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("line {line}: duplicate record for (candidate {candidate:?}, item {item:?})")]
    DuplicateRecord { line: usize, candidate: String, item: String },
    #[error("malformed benchmark file: {0}")]
    Benchmark(String),
}

/// Correctness and output length of one candidate on one item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemOutcome {
    pub item_id: String,
    pub correct: bool,
    /// Generated tokens.
    pub length: f64,
}

/// Accuracy and mean output length. The search minimizes
/// [`fitness`](ObjectiveVector::fitness) = `(-accuracy, mean_length)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    pub accuracy: f64,
    pub mean_length: f64,
}

pub type Fitness = [f64; 2];

impl ObjectiveVector {
    pub fn new(accuracy: f64, mean_length: f64) -> Result<Self, String> {
        if !(0.0..=1.0).contains(&accuracy) {
            return Err(format!("accuracy {accuracy} outside [0, 1]"));
        }
        if !(mean_length.is_finite() && mean_length >= 0.0) {
            return Err(format!("mean length {mean_length} must be finite and non-negative"));
        }
        Ok(Self { accuracy, mean_length })
    }

    pub fn fitness(&self) -> Fitness {
        [-self.accuracy, self.mean_length]
    }

    pub fn dominates(&self, other: &ObjectiveVector) -> bool {
        crate::moea::dominates(&self.fitness(), &other.fitness())
    }
}

pub fn compute_objectives(outcomes: &[ItemOutcome]) -> Result<ObjectiveVector, EvalError> {
    if outcomes.is_empty() {
        return Err(EvalError::EmptyOutcomes);
    }
    let n = outcomes.len() as f64;
    let solved = outcomes.iter().filter(|o| o.correct).count() as f64;
    let total_len: f64 = outcomes.iter().map(|o| o.length).sum();
    Ok(ObjectiveVector {
        accuracy: solved / n,
        mean_length: total_len / n,
    })
}

/// A merge candidate with a stable identifier. Record-based evaluation
/// looks outcomes up by `id`; the simulated benchmark only reads the genotype.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub candidate_id: String,
    pub genotype: Genotype,
}

impl Candidate {
    pub fn new(candidate_id: impl Into<String>, genotype: Genotype) -> Self {
        Self {
            candidate_id: candidate_id.into(),
            genotype,
        }
    }
}

/// Read-only source of per-item outcomes. Implementations must return the
/// same outcomes for the same candidate no matter how calls are interleaved.
pub trait Evaluator: Sync {
    /// Full item universe, in canonical order.
    fn item_ids(&self) -> Vec<String>;

    /// Outcomes for `candidate`, in `subset` order when given, otherwise in
    /// [`item_ids`](Evaluator::item_ids) order.
    fn evaluate(&self, candidate: &Candidate, subset: Option<&[String]>) -> Result<Vec<ItemOutcome>, EvalError>;

    fn objectives(&self, candidate: &Candidate, subset: Option<&[String]>) -> Result<ObjectiveVector, EvalError> {
        compute_objectives(&self.evaluate(candidate, subset)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcomes(correct: &[u8], lengths: &[f64]) -> Vec<ItemOutcome> {
        correct
            .iter()
            .zip(lengths)
            .enumerate()
            .map(|(i, (&c, &l))| ItemOutcome {
                item_id: format!("q{i}"),
                correct: c == 1,
                length: l,
            })
            .collect()
    }

    #[test]
    fn objective_examples() {
        let o = compute_objectives(&outcomes(&[1, 0, 1, 1], &[100.0, 200.0, 300.0, 400.0])).unwrap();
        assert_eq!(o.accuracy, 0.75);
        assert_eq!(o.mean_length, 250.0);
        assert_eq!(o.fitness(), [-0.75, 250.0]);

        let o = compute_objectives(&outcomes(&[1, 1, 1], &[0.0; 3])).unwrap();
        assert_eq!((o.accuracy, o.mean_length), (1.0, 0.0));

        let o = compute_objectives(&outcomes(&[0], &[1234.0])).unwrap();
        assert_eq!((o.accuracy, o.mean_length), (0.0, 1234.0));

        assert!(matches!(compute_objectives(&[]), Err(EvalError::EmptyOutcomes)));
    }

    #[test]
    fn fitness_orientation() {
        let base = ObjectiveVector::new(0.5, 300.0).unwrap();
        let more_accurate = ObjectiveVector::new(0.6, 300.0).unwrap();
        let shorter = ObjectiveVector::new(0.5, 250.0).unwrap();
        assert!(more_accurate.fitness()[0] < base.fitness()[0]);
        assert!(shorter.fitness()[1] < base.fitness()[1]);
        assert!(more_accurate.dominates(&base));
        assert!(shorter.dominates(&base));
    }

    #[test]
    fn objective_vector_invariants() {
        assert!(ObjectiveVector::new(1.2, 0.0).is_err());
        assert!(ObjectiveVector::new(0.5, -1.0).is_err());
        assert!(ObjectiveVector::new(0.5, f64::NAN).is_err());
    }
}
