//! JSONL evaluation records produced by an external inference harness.
//!
//! One object per line:
//! `{"candidate_id": str, "item_id": str, "correct": 0|1, "length": number}`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Candidate, EvalError, Evaluator, ItemOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordLine {
    pub candidate_id: String,
    pub item_id: String,
    pub correct: u8,
    pub length: f64,
}

#[derive(Deserialize)]
struct RawRecord {
    candidate_id: String,
    item_id: String,
    correct: serde_json::Value,
    length: f64,
}

/// Outcomes grouped by candidate, with items in the order first seen.
#[derive(Debug, Clone, Default)]
pub struct RecordSet {
    by_candidate: BTreeMap<String, Vec<ItemOutcome>>,
    item_order: Vec<String>,
}

impl RecordSet {
    pub fn from_lines<I>(lines: I) -> Result<Self, EvalError>
    where
        I: IntoIterator<Item = (usize, String)>,
    {
        let mut set = RecordSet::default();
        let mut seen_items = HashSet::new();
        let mut seen_pairs = HashSet::new();
        for (line, text) in lines {
            let raw: RawRecord = serde_json::from_str(&text).map_err(|e| EvalError::Record {
                line,
                message: e.to_string(),
            })?;
            let correct = match raw.correct.as_u64() {
                Some(0) => false,
                Some(1) => true,
                _ => {
                    return Err(EvalError::Record {
                        line,
                        message: format!("correct must be 0 or 1, got {}", raw.correct),
                    })
                }
            };
            if raw.candidate_id.is_empty() || raw.item_id.is_empty() {
                return Err(EvalError::Record {
                    line,
                    message: "candidate_id and item_id must be non-empty".into(),
                });
            }
            if !(raw.length.is_finite() && raw.length >= 0.0) {
                return Err(EvalError::Record {
                    line,
                    message: format!("length must be a non-negative number, got {}", raw.length),
                });
            }
            if !seen_pairs.insert((raw.candidate_id.clone(), raw.item_id.clone())) {
                return Err(EvalError::DuplicateRecord {
                    line,
                    candidate: raw.candidate_id,
                    item: raw.item_id,
                });
            }
            if seen_items.insert(raw.item_id.clone()) {
                set.item_order.push(raw.item_id.clone());
            }
            set.by_candidate.entry(raw.candidate_id).or_default().push(ItemOutcome {
                item_id: raw.item_id,
                correct,
                length: raw.length,
            });
        }
        Ok(set)
    }

    pub fn get(&self, candidate_id: &str) -> Option<&[ItemOutcome]> {
        self.by_candidate.get(candidate_id).map(Vec::as_slice)
    }

    pub fn candidates(&self) -> impl Iterator<Item = &str> {
        self.by_candidate.keys().map(String::as_str)
    }

    pub fn item_order(&self) -> &[String] {
        &self.item_order
    }

    pub fn len(&self) -> usize {
        self.by_candidate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_candidate.is_empty()
    }

    pub fn into_map(self) -> BTreeMap<String, Vec<ItemOutcome>> {
        self.by_candidate
    }
}

pub fn load_record_evaluations(path: &Path) -> Result<RecordSet, EvalError> {
    let lines = crate::io::read_lines(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    RecordSet::from_lines(lines)
}

/// Looks candidates up by id. Genotypes are not inspected: the external
/// harness is trusted to have evaluated the manifest it was given.
#[derive(Debug, Clone)]
pub struct RecordEvaluator {
    records: RecordSet,
    lookup: HashMap<String, HashMap<String, usize>>,
}

impl RecordEvaluator {
    pub fn new(records: RecordSet) -> Self {
        let lookup = records
            .by_candidate
            .iter()
            .map(|(c, outs)| {
                let idx = outs.iter().enumerate().map(|(i, o)| (o.item_id.clone(), i)).collect();
                (c.clone(), idx)
            })
            .collect();
        Self { records, lookup }
    }

    pub fn records(&self) -> &RecordSet {
        &self.records
    }

    pub fn has_candidate(&self, candidate_id: &str) -> bool {
        self.lookup.contains_key(candidate_id)
    }
}

impl Evaluator for RecordEvaluator {
    fn item_ids(&self) -> Vec<String> {
        self.records.item_order.clone()
    }

    fn evaluate(&self, candidate: &Candidate, subset: Option<&[String]>) -> Result<Vec<ItemOutcome>, EvalError> {
        let id = &candidate.candidate_id;
        let index = self.lookup.get(id).ok_or_else(|| EvalError::MissingCandidate(id.clone()))?;
        let outcomes = &self.records.by_candidate[id];
        let universe;
        let wanted: &[String] = match subset {
            Some(s) => s,
            None => {
                universe = self.item_ids();
                &universe
            }
        };
        wanted
            .iter()
            .map(|item| {
                index
                    .get(item)
                    .map(|&i| outcomes[i].clone())
                    .ok_or_else(|| EvalError::MissingItem {
                        candidate: id.clone(),
                        item: item.clone(),
                    })
            })
            .collect()
    }
}
