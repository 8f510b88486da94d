//! Config-driven pipeline: calibration, subset selection, search and the run
//! directory.
//!
//! A run directory holds:
//!
//! | file              | contents                                              |
//! |-------------------|-------------------------------------------------------|
//! | `config.json`     | the resolved [`RunConfig`]                            |
//! | `calibration.json`| calibration matrix, when a subset was selected         |
//! | `subset.json`     | the fitness subset                                    |
//! | `history.jsonl`   | one evaluated candidate per line                      |
//! | `pareto.json`     | non-dominated set of everything evaluated so far      |
//! | `front.csv`       | the front as accuracy % vs. length reduction %        |
//! | `manifest.jsonl`  | candidates still awaiting external evaluation         |
//!
//! Record-based runs never run inference. When a candidate has no records
//! the pipeline writes `manifest.jsonl` and stops with
//! [`RunStatus::Pending`]; once the harness appends the missing records,
//! rerunning the same config replays the identical search and continues.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
use crate::evaluation::{
    load_record_evaluations, Candidate, EvalError, Evaluator, ItemOutcome, RecordEvaluator, RecordSet, SimulatedBenchmark,
    SimulatedEvaluator,
};
use crate::io::{write_atomic, write_json_atomic, write_jsonl_atomic};
use crate::merge::{decode_genotype, Genotype, LinearBounds, MergeEndpoints, MergeError, MergeKind};
use crate::moea::{extract_pareto, run_nsga2_observed, HistoryEntry, ParetoFront, SearchConfig, SearchError, SearchOutcome};
use crate::report::length_reduction;
use crate::sampling::{
    build_calibration_matrix, calibration_candidates, default_grid, select_subset, CorrectnessMatrix, EvaluationSubset,
    SubsetError, SubsetStrategy,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid run config: {0}")]
    Config(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Subset(#[from] SubsetError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Merge(#[from] MergeError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvaluatorSource {
    Simulated {
        /// JSON array of items; generated with the default generator when absent.
        #[serde(default)]
        benchmark_path: Option<PathBuf>,
        /// Generator seed, and noise seed for logistic items.
        #[serde(default)]
        generator_seed: u64,
    },
    Records {
        record_path: PathBuf,
    },
}

impl Default for EvaluatorSource {
    fn default() -> Self {
        EvaluatorSource::Simulated {
            benchmark_path: None,
            generator_seed: 0,
        }
    }
}

fn default_subset_size() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SubsetSpec {
    Select {
        strategy: SubsetStrategy,
        #[serde(default = "default_subset_size")]
        size: usize,
        #[serde(default)]
        seed: u64,
        /// Reuse a stored calibration matrix instead of evaluating the pool.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        calibration_path: Option<PathBuf>,
    },
    Explicit {
        item_ids: Vec<String>,
    },
    File {
        path: PathBuf,
    },
    Full {
        full: bool,
    },
}

impl Default for SubsetSpec {
    fn default() -> Self {
        SubsetSpec::Select {
            strategy: SubsetStrategy::Entropy,
            size: default_subset_size(),
            seed: 0,
            calibration_path: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MergeSpec {
    /// Must agree with `search.kind` when given.
    #[serde(default)]
    pub kind: Option<MergeKind>,
    #[serde(default)]
    pub system2: Option<PathBuf>,
    #[serde(default)]
    pub system1: Option<PathBuf>,
    #[serde(default)]
    pub linear_bounds: LinearBounds,
}

fn default_calibration_k() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub evaluator: EvaluatorSource,
    #[serde(default)]
    pub subset: SubsetSpec,
    #[serde(default = "default_calibration_k")]
    pub calibration_k: usize,
    #[serde(default)]
    pub merge: MergeSpec,
    /// Candidate whose lengths anchor `front.csv` reductions in record runs.
    #[serde(default)]
    pub baseline_candidate: Option<String>,
    pub output_dir: PathBuf,
}

impl RunConfig {
    /// Defaults: N=20, T=10, seed 0, simulated benchmark, entropy subset of 50
    /// from a K=10 calibration pool.
    pub fn simulated(output_dir: impl Into<PathBuf>) -> Self {
        Self {
            search: SearchConfig::default(),
            evaluator: EvaluatorSource::default(),
            subset: SubsetSpec::default(),
            calibration_k: default_calibration_k(),
            merge: MergeSpec::default(),
            baseline_candidate: None,
            output_dir: output_dir.into(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Reconcile `merge.kind` with `search.kind` and check every section.
    pub fn resolve(mut self) -> Result<Self, RunError> {
        if let Some(kind) = self.merge.kind {
            if kind != self.search.kind && self.search.kind != MergeKind::Ta {
                return Err(RunError::Config(format!(
                    "merge.kind {kind} disagrees with search.kind {}",
                    self.search.kind
                )));
            }
            self.search.kind = kind;
        }
        self.merge.kind = Some(self.search.kind);
        if self.search.genotype_bounds.is_none() && self.search.kind == MergeKind::Linear {
            self.search.genotype_bounds = Some(Genotype::default_bounds(MergeKind::Linear, self.merge.linear_bounds));
        }
        self.search.validate()?;
        if self.calibration_k < 2 {
            return Err(RunError::Config(format!("calibration_k must be at least 2, got {}", self.calibration_k)));
        }
        match &self.subset {
            SubsetSpec::Select { size: 0, .. } => return Err(RunError::Subset(SubsetError::ZeroSize)),
            SubsetSpec::Explicit { item_ids } if item_ids.is_empty() => return Err(RunError::Subset(SubsetError::ZeroSize)),
            SubsetSpec::Full { full: false } => return Err(RunError::Config("subset {\"full\": false} selects nothing".into())),
            _ => {}
        }
        if self.merge.system2.is_some() != self.merge.system1.is_some() {
            return Err(RunError::Config("give both merge.system2 and merge.system1, or neither".into()));
        }
        Ok(self)
    }
}

/// Either evaluator behind one type.
pub enum LoadedEvaluator {
    Simulated(SimulatedEvaluator),
    Records(RecordEvaluator),
}

impl LoadedEvaluator {
    pub fn load(source: &EvaluatorSource) -> Result<Self, RunError> {
        Ok(match source {
            EvaluatorSource::Simulated {
                benchmark_path: Some(p),
                generator_seed,
            } => LoadedEvaluator::Simulated(SimulatedEvaluator::new(SimulatedBenchmark::load(p, *generator_seed)?)),
            EvaluatorSource::Simulated {
                benchmark_path: None,
                generator_seed,
            } => LoadedEvaluator::Simulated(SimulatedEvaluator::new(SimulatedBenchmark::generate(
                &Default::default(),
                *generator_seed,
            ))),
            // No file yet means no candidate has been evaluated.
            EvaluatorSource::Records { record_path } if !record_path.exists() => {
                LoadedEvaluator::Records(RecordEvaluator::new(RecordSet::default()))
            }
            EvaluatorSource::Records { record_path } => {
                LoadedEvaluator::Records(RecordEvaluator::new(load_record_evaluations(record_path)?))
            }
        })
    }

    /// Candidates the evaluator cannot answer yet. Always empty for the
    /// simulated benchmark.
    pub fn missing<'a>(&self, candidates: &'a [Candidate]) -> Vec<&'a Candidate> {
        match self {
            LoadedEvaluator::Simulated(_) => Vec::new(),
            LoadedEvaluator::Records(r) => candidates.iter().filter(|c| !r.has_candidate(&c.candidate_id)).collect(),
        }
    }
}

impl Evaluator for LoadedEvaluator {
    fn item_ids(&self) -> Vec<String> {
        match self {
            LoadedEvaluator::Simulated(e) => e.item_ids(),
            LoadedEvaluator::Records(e) => e.item_ids(),
        }
    }

    fn evaluate(&self, candidate: &Candidate, subset: Option<&[String]>) -> Result<Vec<ItemOutcome>, EvalError> {
        match self {
            LoadedEvaluator::Simulated(e) => e.evaluate(candidate, subset),
            LoadedEvaluator::Records(e) => e.evaluate(candidate, subset),
        }
    }
}

#[derive(Debug)]
pub enum RunStatus<T> {
    Complete(T),
    /// External evaluation is needed; the manifest lists what to run.
    Pending { manifest: PathBuf, candidates: Vec<Candidate> },
}

impl<T> RunStatus<T> {
    pub fn complete(self) -> Option<T> {
        match self {
            RunStatus::Complete(t) => Some(t),
            RunStatus::Pending { .. } => None,
        }
    }
}

/// Writes the candidate manifest, plus merged checkpoints under
/// `candidates/` when endpoints are configured.
pub fn write_manifest(out_dir: &Path, candidates: &[Candidate], merge: &MergeSpec) -> Result<PathBuf, RunError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let path = out_dir.join("manifest.jsonl");
    write_jsonl_atomic(&path, candidates).map_err(io_err(&path))?;
    if let (Some(s2), Some(s1)) = (&merge.system2, &merge.system1) {
        let endpoints = MergeEndpoints::new(load_checkpoint(s2)?, load_checkpoint(s1)?)?;
        let dir = out_dir.join("candidates");
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for c in candidates {
            let mut merged = decode_genotype(&c.genotype, &endpoints, merge.linear_bounds)?;
            merged.metadata.insert("candidate_id".into(), c.candidate_id.clone());
            merged.metadata.insert("genotype".into(), serde_json::to_string(&c.genotype).expect("genotype serializes"));
            save_checkpoint(&merged, dir.join(format!("{}.pmrg", c.candidate_id)))?;
        }
    }
    Ok(path)
}

/// Evaluate the K-point calibration pool, or report which pool members still
/// need external evaluation.
pub fn calibrate(
    evaluator: &LoadedEvaluator,
    k: usize,
    out_dir: &Path,
    merge: &MergeSpec,
) -> Result<RunStatus<CorrectnessMatrix>, RunError> {
    let grid = default_grid(k)?;
    let pool = calibration_candidates(&grid);
    let missing: Vec<Candidate> = evaluator.missing(&pool).into_iter().cloned().collect();
    if !missing.is_empty() {
        let manifest = write_manifest(out_dir, &missing, merge)?;
        return Ok(RunStatus::Pending {
            manifest,
            candidates: missing,
        });
    }
    let matrix = build_calibration_matrix(evaluator, &grid)?;
    Ok(RunStatus::Complete(matrix))
}

/// Item ids of the fitness subset, persisting `calibration.json` and
/// `subset.json` when a strategy is applied.
pub fn resolve_subset(cfg: &RunConfig, evaluator: &LoadedEvaluator) -> Result<RunStatus<Vec<String>>, RunError> {
    let universe = evaluator.item_ids();
    let ids = match &cfg.subset {
        SubsetSpec::Full { .. } => universe.clone(),
        SubsetSpec::Explicit { item_ids } => item_ids.clone(),
        SubsetSpec::File { path } => EvaluationSubset::load(path)?.item_ids,
        SubsetSpec::Select {
            strategy,
            size,
            seed,
            calibration_path,
        } => {
            let matrix = match calibration_path {
                Some(p) => CorrectnessMatrix::load(p)?,
                None => match calibrate(evaluator, cfg.calibration_k, &cfg.output_dir, &cfg.merge)? {
                    RunStatus::Complete(m) => m,
                    RunStatus::Pending { manifest, candidates } => return Ok(RunStatus::Pending { manifest, candidates }),
                },
            };
            let cal_path = cfg.output_dir.join("calibration.json");
            matrix.save(&cal_path)?;
            let subset = select_subset(&matrix, *strategy, *size, *seed)?;
            subset.save(&cfg.output_dir.join("subset.json"))?;
            subset.item_ids
        }
    };
    // Record runs learn their items from the harness; gaps surface as
    // missing (candidate, item) records instead.
    if matches!(evaluator, LoadedEvaluator::Records(_)) {
        return Ok(RunStatus::Complete(ids));
    }
    if ids.len() > universe.len() {
        return Err(SubsetError::SizeTooLarge {
            size: ids.len(),
            available: universe.len(),
        }
        .into());
    }
    let known: std::collections::HashSet<&String> = universe.iter().collect();
    if let Some(bad) = ids.iter().find(|id| !known.contains(id)) {
        return Err(SubsetError::UnknownItem(bad.clone()).into());
    }
    Ok(RunStatus::Complete(ids))
}

#[derive(Debug, Clone)]
pub struct EvolveResult {
    pub outcome: SearchOutcome,
    pub subset: Vec<String>,
    /// Baseline objectives on the fitness subset, when known.
    pub baseline_length: Option<f64>,
}

fn persist_progress(out_dir: &Path, history: &[HistoryEntry]) -> std::io::Result<()> {
    write_jsonl_atomic(&out_dir.join("history.jsonl"), history)?;
    if let Ok(front) = extract_pareto(history) {
        write_json_atomic(&out_dir.join("pareto.json"), &front)?;
    }
    Ok(())
}

/// Run the whole pipeline for `cfg`, writing the run directory.
pub fn run_evolve(cfg: &RunConfig) -> Result<RunStatus<EvolveResult>, RunError> {
    let cfg = cfg.clone().resolve()?;
    let out = cfg.output_dir.clone();
    fs::create_dir_all(&out).map_err(io_err(&out))?;
    write_json_atomic(&out.join("config.json"), &cfg).map_err(io_err(&out))?;
    let _ = fs::remove_file(out.join("manifest.jsonl"));

    let evaluator = LoadedEvaluator::load(&cfg.evaluator)?;
    let subset = match resolve_subset(&cfg, &evaluator)? {
        RunStatus::Complete(ids) => ids,
        RunStatus::Pending { manifest, candidates } => return Ok(RunStatus::Pending { manifest, candidates }),
    };

    let result = run_nsga2_observed(
        &cfg.search,
        |c: &Candidate| evaluator.objectives(c, Some(&subset)),
        |p| persist_progress(&out, p.history),
    );
    let outcome = match result {
        Ok(outcome) => outcome,
        Err(SearchError::Evaluation {
            generation,
            history,
            failures,
        }) => {
            persist_progress(&out, &history).map_err(io_err(&out))?;
            let all_pending = failures.iter().all(|(_, e)| matches!(e, EvalError::MissingCandidate(_)));
            if all_pending && matches!(evaluator, LoadedEvaluator::Records(_)) {
                let candidates: Vec<Candidate> = failures.into_iter().map(|(c, _)| c).collect();
                let manifest = write_manifest(&out, &candidates, &cfg.merge)?;
                return Ok(RunStatus::Pending { manifest, candidates });
            }
            return Err(SearchError::Evaluation {
                generation,
                history,
                failures,
            }
            .into());
        }
        Err(e) => return Err(e.into()),
    };

    let baseline_length = baseline_length(&cfg, &evaluator, &subset);
    write_front_csv(&out.join("front.csv"), &outcome.front, baseline_length)?;
    Ok(RunStatus::Complete(EvolveResult {
        outcome,
        subset,
        baseline_length,
    }))
}

/// Mean length of the System-2 endpoint on the subset: the TA candidate at
/// zero for simulated runs, `baseline_candidate` for record runs.
fn baseline_length(cfg: &RunConfig, evaluator: &LoadedEvaluator, subset: &[String]) -> Option<f64> {
    let candidate = match (evaluator, &cfg.baseline_candidate) {
        (_, Some(id)) => Candidate::new(id.clone(), Genotype::ta(0.0)),
        (LoadedEvaluator::Simulated(_), None) => Candidate::new("system2", Genotype::ta(0.0)),
        (LoadedEvaluator::Records(_), None) => return None,
    };
    evaluator.objectives(&candidate, Some(subset)).ok().map(|o| o.mean_length)
}

#[derive(Serialize)]
struct FrontRow<'a> {
    candidate_id: &'a str,
    genotype: String,
    accuracy_pct: f64,
    mean_length: f64,
    length_reduction_pct: Option<f64>,
}

pub fn write_front_csv(path: &Path, front: &ParetoFront, baseline_length: Option<f64>) -> Result<(), RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for m in &front.members {
        let values: Vec<String> = m.genotype.values.iter().map(|v| v.to_string()).collect();
        w.serialize(FrontRow {
            candidate_id: &m.candidate_id,
            genotype: format!("{}:{}", m.genotype.kind, values.join(";")),
            accuracy_pct: 100.0 * m.accuracy,
            mean_length: m.mean_length,
            length_reduction_pct: baseline_length.map(|b| length_reduction(m.mean_length, b)),
        })
        .map_err(|e| RunError::Config(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| RunError::Config(e.to_string()))?;
    write_atomic(path, &bytes).map_err(io_err(path))
}
