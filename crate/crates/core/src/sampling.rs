//! Calibration matrices, item entropy, evaluation-subset selection and
//! rank-fidelity measurement.
//!
//! A calibration pool of `K` TA candidates at evenly spaced coefficients is
//! evaluated on every item. Each item's solve rate `p` across the pool gives
//! a Bernoulli entropy in bits; the most uncertain items form the fitness
//! subset. Random and endpoint-disagreement selection are the baselines.

use std::cmp::Ordering;
use std::fmt;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{simulated_accuracy, Candidate, EvalError, Evaluator, SimulatedBenchmark, SimulatedEvaluator};
use crate::merge::Genotype;
use crate::rng::{self, Stream};

#[derive(Debug, Error)]
pub enum SubsetError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid calibration matrix: {0}")]
    Matrix(String),
    #[error("invalid coefficient grid: {0}")]
    Grid(String),
    #[error("unknown item id {0:?}")]
    UnknownItem(String),
    #[error("probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("subset size must be at least 1")]
    ZeroSize,
    #[error("subset size {size} exceeds the {available} available items")]
    SizeTooLarge { size: usize, available: usize },
    #[error("{strategy} selection found {eligible} eligible items, {requested} requested")]
    TooFewEligible {
        strategy: SubsetStrategy,
        eligible: usize,
        requested: usize,
    },
    #[error("rank correlation needs equal-length inputs, got {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("rank correlation needs at least two observations")]
    TooShort,
    #[error("rank correlation is undefined for a constant input")]
    ConstantInput,
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Rows are calibration candidates, columns are items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectnessMatrix {
    pub model_ids: Vec<String>,
    /// TA coefficient of each row, when the rows came from a coefficient grid.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambdas: Vec<f64>,
    pub item_ids: Vec<String>,
    pub correct: Vec<Vec<u8>>,
    pub lengths: Vec<Vec<f64>>,
}

impl CorrectnessMatrix {
    pub fn validate(&self) -> Result<(), SubsetError> {
        let k = self.model_ids.len();
        let n = self.item_ids.len();
        if k < 2 {
            return Err(SubsetError::Matrix(format!("need at least 2 models, got {k}")));
        }
        if n == 0 {
            return Err(SubsetError::Matrix("no items".into()));
        }
        if self.correct.len() != k || self.lengths.len() != k {
            return Err(SubsetError::Matrix("row count does not match model_ids".into()));
        }
        if !self.lambdas.is_empty() && self.lambdas.len() != k {
            return Err(SubsetError::Matrix("lambdas do not match model_ids".into()));
        }
        for (r, (c, l)) in self.correct.iter().zip(&self.lengths).enumerate() {
            if c.len() != n || l.len() != n {
                return Err(SubsetError::Matrix(format!("row {r} does not have {n} columns")));
            }
            if let Some(v) = c.iter().find(|&&v| v > 1) {
                return Err(SubsetError::Matrix(format!("row {r} has non-binary entry {v}")));
            }
            if l.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(SubsetError::Matrix(format!("row {r} has an invalid length")));
            }
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = self.item_ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(SubsetError::Matrix(format!("duplicate item id {dup:?}")));
        }
        Ok(())
    }

    pub fn n_models(&self) -> usize {
        self.model_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    /// Mean of column `col`.
    pub fn solve_rate_at(&self, col: usize) -> f64 {
        let solved: u32 = self.correct.iter().map(|row| u32::from(row[col])).sum();
        f64::from(solved) / self.n_models() as f64
    }

    pub fn load(path: &Path) -> Result<Self, SubsetError> {
        let text = std::fs::read_to_string(path).map_err(|source| SubsetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let m: Self = serde_json::from_str(&text).map_err(|e| SubsetError::Matrix(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<(), SubsetError> {
        let mut bytes = serde_json::to_vec(self).map_err(|e| SubsetError::Matrix(e.to_string()))?;
        bytes.push(b'\n');
        crate::io::write_atomic(path, &bytes).map_err(|source| SubsetError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// `K` evenly spaced coefficients `k / (K - 1)` covering `[0, 1]`.
pub fn default_grid(k: usize) -> Result<Vec<f64>, SubsetError> {
    if k < 2 {
        return Err(SubsetError::Grid(format!("K must be at least 2, got {k}")));
    }
    Ok((0..k).map(|i| i as f64 / (k - 1) as f64).collect())
}

fn check_grid(grid: &[f64]) -> Result<(), SubsetError> {
    if grid.len() < 2 {
        return Err(SubsetError::Grid(format!("need at least 2 coefficients, got {}", grid.len())));
    }
    if let Some(bad) = grid.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(SubsetError::Grid(format!("coefficient {bad} outside [0, 1]")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SubsetError::Grid("coefficients must be strictly increasing".into()));
    }
    Ok(())
}

/// TA candidates of the calibration pool, ids `calib-00`, `calib-01`, ...
pub fn calibration_candidates(grid: &[f64]) -> Vec<Candidate> {
    grid.iter()
        .enumerate()
        .map(|(k, &l)| Candidate::new(format!("calib-{k:02}"), Genotype::ta(l)))
        .collect()
}

pub fn build_calibration_matrix(evaluator: &dyn Evaluator, grid: &[f64]) -> Result<CorrectnessMatrix, SubsetError> {
    check_grid(grid)?;
    let item_ids = evaluator.item_ids();
    let candidates = calibration_candidates(grid);
    let rows = candidates
        .par_iter()
        .map(|c| evaluator.evaluate(c, Some(&item_ids)))
        .collect::<Result<Vec<_>, _>>()?;
    let matrix = CorrectnessMatrix {
        model_ids: candidates.into_iter().map(|c| c.candidate_id).collect(),
        lambdas: grid.to_vec(),
        item_ids,
        correct: rows.iter().map(|r| r.iter().map(|o| u8::from(o.correct)).collect()).collect(),
        lengths: rows.iter().map(|r| r.iter().map(|o| o.length).collect()).collect(),
    };
    matrix.validate()?;
    Ok(matrix)
}

pub fn empirical_solve_rate(m: &CorrectnessMatrix, item: &str) -> Result<f64, SubsetError> {
    let col = m
        .item_ids
        .iter()
        .position(|id| id == item)
        .ok_or_else(|| SubsetError::UnknownItem(item.to_string()))?;
    Ok(m.solve_rate_at(col))
}

/// Entropy in bits of a Bernoulli(p) variable, with `0 log 0 = 0`.
pub fn bernoulli_entropy(p: f64) -> Result<f64, SubsetError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(SubsetError::Probability(p));
    }
    let term = |x: f64| if x == 0.0 { 0.0 } else { -x * x.log2() };
    Ok(term(p) + term(1.0 - p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemStats {
    pub item_id: String,
    pub p: f64,
    pub entropy: f64,
}

pub fn item_stats(m: &CorrectnessMatrix) -> Vec<ItemStats> {
    (0..m.n_items())
        .map(|col| {
            let p = m.solve_rate_at(col);
            ItemStats {
                item_id: m.item_ids[col].clone(),
                p,
                entropy: bernoulli_entropy(p).expect("solve rate is a probability"),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubsetStrategy {
    Entropy,
    Random,
    Disagreement,
}

impl SubsetStrategy {
    pub const ALL: [SubsetStrategy; 3] = [SubsetStrategy::Entropy, SubsetStrategy::Random, SubsetStrategy::Disagreement];

    pub fn as_str(self) -> &'static str {
        match self {
            SubsetStrategy::Entropy => "entropy",
            SubsetStrategy::Random => "random",
            SubsetStrategy::Disagreement => "disagreement",
        }
    }
}

impl fmt::Display for SubsetStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SubsetStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "entropy" => Ok(SubsetStrategy::Entropy),
            "random" => Ok(SubsetStrategy::Random),
            "disagreement" => Ok(SubsetStrategy::Disagreement),
            other => Err(format!("unknown strategy {other:?} (expected entropy, random or disagreement)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSubset {
    pub strategy: SubsetStrategy,
    pub seed: u64,
    pub item_ids: Vec<String>,
}

impl EvaluationSubset {
    pub fn len(&self) -> usize {
        self.item_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.item_ids.is_empty()
    }

    pub fn load(path: &Path) -> Result<Self, SubsetError> {
        let text = std::fs::read_to_string(path).map_err(|source| SubsetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let s: Self = serde_json::from_str(&text).map_err(|e| SubsetError::Matrix(e.to_string()))?;
        if s.is_empty() {
            return Err(SubsetError::ZeroSize);
        }
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<(), SubsetError> {
        crate::io::write_json_atomic(path, self).map_err(|source| SubsetError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Column indices chosen by `strategy`, in ascending order for RANDOM and
/// DISAGREEMENT and in selection order for ENTROPY.
pub fn select_positions(m: &CorrectnessMatrix, strategy: SubsetStrategy, size: usize, seed: u64) -> Result<Vec<usize>, SubsetError> {
    let n = m.n_items();
    if size == 0 {
        return Err(SubsetError::ZeroSize);
    }
    if size > n {
        return Err(SubsetError::SizeTooLarge { size, available: n });
    }
    match strategy {
        SubsetStrategy::Entropy => {
            let stats = item_stats(m);
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&i, &j| stats[j].entropy.total_cmp(&stats[i].entropy).then(i.cmp(&j)));
            order.truncate(size);
            Ok(order)
        }
        SubsetStrategy::Random => {
            let mut r = rng::stream(seed, 0, Stream::Subset, 0);
            let mut picked = rand::seq::index::sample(&mut r, n, size).into_vec();
            picked.sort_unstable();
            Ok(picked)
        }
        SubsetStrategy::Disagreement => {
            let first = &m.correct[0];
            let last = &m.correct[m.n_models() - 1];
            let eligible: Vec<usize> = (0..n).filter(|&i| first[i] != last[i]).collect();
            if eligible.len() < size {
                return Err(SubsetError::TooFewEligible {
                    strategy,
                    eligible: eligible.len(),
                    requested: size,
                });
            }
            Ok(eligible[..size].to_vec())
        }
    }
}

pub fn select_subset(m: &CorrectnessMatrix, strategy: SubsetStrategy, size: usize, seed: u64) -> Result<EvaluationSubset, SubsetError> {
    let positions = select_positions(m, strategy, size, seed)?;
    Ok(EvaluationSubset {
        strategy,
        seed,
        item_ids: positions.into_iter().map(|i| m.item_ids[i].clone()).collect(),
    })
}

/// Probability that a threshold item at `t` separates two coefficients drawn
/// independently and uniformly: `2 t (1 - t)`.
pub fn expected_distinction(t: f64) -> f64 {
    2.0 * t * (1.0 - t)
}

/// 1-based ranks with tied values sharing the mean of their positions.
pub fn mid_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]].total_cmp(&x[order[start]]) == Ordering::Equal {
            end += 1;
        }
        // positions start..end (0-based) share rank mean((start+1)..=end)
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman correlation: Pearson correlation of mid-ranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64, SubsetError> {
    if x.len() != y.len() {
        return Err(SubsetError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(SubsetError::TooShort);
    }
    let rx = mid_ranks(x);
    let ry = mid_ranks(y);
    let mean = (x.len() + 1) as f64 / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        let (dx, dy) = (a - mean, b - mean);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(SubsetError::ConstantInput);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityConfig {
    pub strategies: Vec<SubsetStrategy>,
    pub sizes: Vec<usize>,
    pub n_models: usize,
    pub seeds: Vec<u64>,
    /// Size of the calibration pool used by ENTROPY and DISAGREEMENT.
    pub calibration_k: usize,
}

impl Default for FidelityConfig {
    fn default() -> Self {
        Self {
            strategies: SubsetStrategy::ALL.to_vec(),
            sizes: vec![10, 25, 50, 100, 200],
            n_models: 50,
            seeds: (0..20).collect(),
            calibration_k: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityRow {
    pub strategy: SubsetStrategy,
    pub size: usize,
    pub seed: u64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityMean {
    pub strategy: SubsetStrategy,
    pub size: usize,
    pub mean_rho: f64,
    pub seeds: usize,
}

/// For every seed, draw `n_models` coefficients uniformly, rank them by
/// full-benchmark accuracy and by subset accuracy, and record Spearman's rho
/// for each (strategy, size) cell.
///
/// A subset whose accuracies are all equal carries no ordering and scores
/// `rho = 0`. A size equal to the item count always uses the full benchmark.
pub fn rank_fidelity_curve(bench: &SimulatedBenchmark, cfg: &FidelityConfig) -> Result<Vec<FidelityRow>, SubsetError> {
    let n = bench.len();
    if cfg.n_models < 2 {
        return Err(SubsetError::TooShort);
    }
    if let Some(&size) = cfg.sizes.iter().find(|&&s| s > n) {
        return Err(SubsetError::SizeTooLarge { size, available: n });
    }
    let matrix = build_calibration_matrix(&SimulatedEvaluator::new(bench.clone()), &default_grid(cfg.calibration_k)?)?;
    let all: Vec<usize> = (0..n).collect();

    // Seed-independent subsets, computed once per (strategy, size).
    let mut fixed = std::collections::HashMap::new();
    for &strategy in &cfg.strategies {
        if strategy == SubsetStrategy::Random {
            continue;
        }
        for &size in &cfg.sizes {
            let positions = if size == n { all.clone() } else { select_positions(&matrix, strategy, size, 0)? };
            fixed.insert((strategy, size), positions);
        }
    }

    let per_seed: Vec<Vec<FidelityRow>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let mut r = rng::stream(seed, 0, Stream::Fidelity, 0);
            let lambdas: Vec<f64> = (0..cfg.n_models).map(|_| r.gen::<f64>()).collect();
            let full: Vec<f64> = lambdas.iter().map(|&l| simulated_accuracy(bench, l, &all)).collect();
            let mut rows = Vec::new();
            for &strategy in &cfg.strategies {
                for &size in &cfg.sizes {
                    let random;
                    let positions = match fixed.get(&(strategy, size)) {
                        Some(p) => p,
                        None if size == n => &all,
                        None => {
                            random = select_positions(&matrix, strategy, size, seed)?;
                            &random
                        }
                    };
                    let sub: Vec<f64> = lambdas.iter().map(|&l| simulated_accuracy(bench, l, positions)).collect();
                    let rho = match spearman_rho(&full, &sub) {
                        Ok(rho) => rho,
                        Err(SubsetError::ConstantInput) => 0.0,
                        Err(e) => return Err(e),
                    };
                    rows.push(FidelityRow { strategy, size, seed, rho });
                }
            }
            Ok(rows)
        })
        .collect::<Result<_, SubsetError>>()?;

    let mut rows: Vec<FidelityRow> = per_seed.into_iter().flatten().collect();
    let strategy_pos = |s: SubsetStrategy| cfg.strategies.iter().position(|&x| x == s);
    let size_pos = |z: usize| cfg.sizes.iter().position(|&x| x == z);
    rows.sort_by_key(|r| (strategy_pos(r.strategy), size_pos(r.size), cfg.seeds.iter().position(|&s| s == r.seed)));
    Ok(rows)
}

/// Per-cell means, in the order cells first appear in `rows`.
pub fn aggregate_fidelity(rows: &[FidelityRow]) -> Vec<FidelityMean> {
    let mut out: Vec<(FidelityMean, f64)> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|(m, _)| m.strategy == r.strategy && m.size == r.size) {
            Some((m, sum)) => {
                m.seeds += 1;
                *sum += r.rho;
            }
            None => out.push((
                FidelityMean {
                    strategy: r.strategy,
                    size: r.size,
                    mean_rho: 0.0,
                    seeds: 1,
                },
                r.rho,
            )),
        }
    }
    out.into_iter()
        .map(|(mut m, sum)| {
            m.mean_rho = sum / m.seeds as f64;
            m
        })
        .collect()
}

pub fn write_fidelity_csv(path: &Path, rows: &[FidelityRow]) -> Result<(), SubsetError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| SubsetError::Matrix(e.to_string()))?;
    }
    write_csv(path, w)
}

pub fn write_fidelity_mean_csv(path: &Path, means: &[FidelityMean]) -> Result<(), SubsetError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for m in means {
        w.serialize(m).map_err(|e| SubsetError::Matrix(e.to_string()))?;
    }
    write_csv(path, w)
}

fn write_csv(path: &Path, w: csv::Writer<Vec<u8>>) -> Result<(), SubsetError> {
    let bytes = w.into_inner().map_err(|e| SubsetError::Matrix(e.to_string()))?;
    crate::io::write_atomic(path, &bytes).map_err(|source| SubsetError::Io {
        path: path.to_path_buf(),
        source,
    })
}
