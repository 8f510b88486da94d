//! Synthetic item-response benchmark indexed by the interpolation coefficient.
//!
//! Each item answers a TA candidate at coefficient `lambda` with one of three
//! response curves:
//!
//! - `THRESHOLD_UP`: solved iff `lambda >= t`
//! - `THRESHOLD_DOWN`: solved iff `lambda <= t`
//! - `LOGISTIC`: solved with probability `sigmoid(a * (lambda - t))`, drawn
//!   from a stream keyed by `(item_id, round(lambda * 1e6), noise_seed)`
//!
//! Output length falls linearly from `len_long` at `lambda = 0` to
//! `len_short` at `lambda = 1`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Candidate, EvalError, Evaluator, ItemOutcome};
use crate::merge::MergeKind;
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ResponseKind {
    ThresholdUp,
    ThresholdDown,
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimItem {
    pub item_id: String,
    pub response_kind: ResponseKind,
    /// Threshold, or logistic midpoint.
    pub t: f64,
    /// Logistic slope; absent for threshold items.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    pub len_long: f64,
    pub len_short: f64,
}

impl SimItem {
    fn validate(&self) -> Result<(), EvalError> {
        let bad = |reason: String| EvalError::InvalidItem {
            item: self.item_id.clone(),
            reason,
        };
        if self.item_id.is_empty() {
            return Err(bad("empty item id".into()));
        }
        if !(0.0..=1.0).contains(&self.t) {
            return Err(bad(format!("t = {} outside [0, 1]", self.t)));
        }
        if !(self.len_short.is_finite() && self.len_long.is_finite() && self.len_long >= self.len_short && self.len_short >= 0.0) {
            return Err(bad(format!(
                "lengths must satisfy len_long >= len_short >= 0 (got {}, {})",
                self.len_long, self.len_short
            )));
        }
        match (self.response_kind, self.a) {
            (ResponseKind::Logistic, Some(a)) if a > 0.0 && a.is_finite() => Ok(()),
            (ResponseKind::Logistic, _) => Err(bad("logistic items need a slope a > 0".into())),
            _ => Ok(()),
        }
    }

    pub fn length_at(&self, lambda: f64) -> f64 {
        self.len_long + (self.len_short - self.len_long) * lambda
    }

    /// Probability of a correct answer at `lambda`.
    pub fn solve_probability(&self, lambda: f64) -> f64 {
        match self.response_kind {
            ResponseKind::ThresholdUp => f64::from(u8::from(lambda >= self.t)),
            ResponseKind::ThresholdDown => f64::from(u8::from(lambda <= self.t)),
            ResponseKind::Logistic => logistic_response(self.a.unwrap_or(1.0), self.t, lambda),
        }
    }

    pub fn is_correct(&self, lambda: f64, noise_seed: u64) -> bool {
        match self.response_kind {
            ResponseKind::ThresholdUp => lambda >= self.t,
            ResponseKind::ThresholdDown => lambda <= self.t,
            ResponseKind::Logistic => {
                let bucket = (lambda * 1e6).round() as i64 as u64;
                rng::keyed_uniform(&self.item_id, bucket, noise_seed) < self.solve_probability(lambda)
            }
        }
    }
}

/// `1 / (1 + exp(-a (lambda - b)))`, written to stay finite for large `|a (lambda - b)|`.
pub fn logistic_response(a: f64, b: f64, lambda: f64) -> f64 {
    let z = a * (lambda - b);
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Knobs of the default benchmark generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_items: usize,
    pub frac_threshold_up: f64,
    pub frac_threshold_down: f64,
    pub slope: (f64, f64),
    pub len_long: (f64, f64),
    pub len_short: (f64, f64),
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_items: 1000,
            frac_threshold_up: 0.45,
            frac_threshold_down: 0.45,
            slope: (4.0, 12.0),
            len_long: (1500.0, 6000.0),
            len_short: (100.0, 800.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedBenchmark {
    items: Vec<SimItem>,
    noise_seed: u64,
    index: HashMap<String, usize>,
}

impl SimulatedBenchmark {
    pub fn new(items: Vec<SimItem>, noise_seed: u64) -> Result<Self, EvalError> {
        let mut index = HashMap::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            item.validate()?;
            if index.insert(item.item_id.clone(), i).is_some() {
                return Err(EvalError::DuplicateItem(item.item_id.clone()));
            }
        }
        Ok(Self {
            items,
            noise_seed,
            index,
        })
    }

    /// Item kinds are assigned in the configured proportions (rounded to
    /// whole counts) and shuffled, then every item draws its parameters.
    pub fn generate(cfg: &GeneratorConfig, seed: u64) -> Self {
        let n = cfg.n_items;
        let n_up = ((n as f64) * cfg.frac_threshold_up).round() as usize;
        let n_down = (((n as f64) * cfg.frac_threshold_down).round() as usize).min(n - n_up.min(n));
        let mut kinds: Vec<ResponseKind> = std::iter::repeat_n(ResponseKind::ThresholdUp, n_up.min(n))
            .chain(std::iter::repeat_n(ResponseKind::ThresholdDown, n_down))
            .collect();
        kinds.resize(n, ResponseKind::Logistic);

        let mut rng = rng::stream(seed, 0, Stream::Generator, 0);
        kinds.shuffle(&mut rng);
        let width = n.max(1).to_string().len();
        let items = kinds
            .into_iter()
            .enumerate()
            .map(|(i, kind)| {
                let t = rng.gen::<f64>();
                let a = rng.gen_range(cfg.slope.0..=cfg.slope.1);
                let len_long = rng.gen_range(cfg.len_long.0..=cfg.len_long.1);
                let len_short = rng.gen_range(cfg.len_short.0..=cfg.len_short.1);
                SimItem {
                    item_id: format!("item-{i:0width$}"),
                    response_kind: kind,
                    t,
                    a: (kind == ResponseKind::Logistic).then_some(a),
                    len_long,
                    len_short,
                }
            })
            .collect();
        Self::new(items, seed).expect("generator produces valid items")
    }

    pub fn items(&self) -> &[SimItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn noise_seed(&self) -> u64 {
        self.noise_seed
    }

    pub fn item_ids(&self) -> Vec<String> {
        self.items.iter().map(|i| i.item_id.clone()).collect()
    }

    pub fn position(&self, item_id: &str) -> Option<usize> {
        self.index.get(item_id).copied()
    }

    /// Largest possible output length, i.e. the longest `len_long`.
    pub fn max_length(&self) -> f64 {
        self.items.iter().map(|i| i.len_long).fold(0.0, f64::max)
    }

    /// Items serialize as a bare JSON array; the noise seed travels separately.
    pub fn load(path: &Path, noise_seed: u64) -> Result<Self, EvalError> {
        let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let items: Vec<SimItem> = serde_json::from_str(&text).map_err(|e| EvalError::Benchmark(e.to_string()))?;
        Self::new(items, noise_seed)
    }

    pub fn save(&self, path: &Path) -> Result<(), EvalError> {
        crate::io::write_json_atomic(path, &self.items).map_err(|source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

pub fn evaluate_simulated(
    bench: &SimulatedBenchmark,
    lambda: f64,
    subset: Option<&[String]>,
) -> Result<Vec<ItemOutcome>, EvalError> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(EvalError::UnsupportedGenotype(format!("lambda {lambda} outside [0, 1]")));
    }
    let outcome = |item: &SimItem| ItemOutcome {
        item_id: item.item_id.clone(),
        correct: item.is_correct(lambda, bench.noise_seed),
        length: item.length_at(lambda),
    };
    match subset {
        None => Ok(bench.items.iter().map(outcome).collect()),
        Some(ids) => ids
            .iter()
            .map(|id| {
                bench
                    .position(id)
                    .map(|i| outcome(&bench.items[i]))
                    .ok_or_else(|| EvalError::UnknownItem(id.clone()))
            })
            .collect(),
    }
}

/// Accuracy of a TA candidate over item positions, without building outcomes.
pub(crate) fn accuracy_at(bench: &SimulatedBenchmark, lambda: f64, positions: &[usize]) -> f64 {
    let solved = positions
        .iter()
        .filter(|&&i| bench.items[i].is_correct(lambda, bench.noise_seed))
        .count();
    solved as f64 / positions.len() as f64
}

/// The simulated benchmark answers TA genotypes only: it is indexed by the
/// interpolation coefficient and has no notion of density or free weights.
#[derive(Debug, Clone)]
pub struct SimulatedEvaluator {
    pub bench: SimulatedBenchmark,
}

impl SimulatedEvaluator {
    pub fn new(bench: SimulatedBenchmark) -> Self {
        Self { bench }
    }
}

impl Evaluator for SimulatedEvaluator {
    fn item_ids(&self) -> Vec<String> {
        self.bench.item_ids()
    }

    fn evaluate(&self, candidate: &Candidate, subset: Option<&[String]>) -> Result<Vec<ItemOutcome>, EvalError> {
        let g = &candidate.genotype;
        if g.kind != MergeKind::Ta || g.values.len() != 1 {
            return Err(EvalError::UnsupportedGenotype(format!(
                "simulated benchmark evaluates ta genotypes only, got {g}"
            )));
        }
        evaluate_simulated(&self.bench, g.values[0], subset)
    }
}
