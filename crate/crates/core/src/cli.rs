//! The `paretomerge` command line.
//!
//! Exit status is 0 on success, 1 when a pipeline step fails and 2 for
//! malformed invocations (bad flags, parameters outside their bounds, an
//! unreadable config). Record-based steps that still need external
//! evaluation write `manifest.jsonl`, say so on stdout and exit 0.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::evaluation::{Candidate, Evaluator, ItemOutcome, SimulatedBenchmark};
use crate::io::read_lines;
use crate::merge::{decode_genotype, Genotype, LinearBounds, MergeEndpoints, MergeError, MergeKind};
use crate::moea::{HistoryEntry, SearchError};
use crate::report::build_report;
use crate::run::{calibrate, run_evolve, EvaluatorSource, LoadedEvaluator, RunConfig, RunError, RunStatus};
use crate::sampling::{
    aggregate_fidelity, item_stats, rank_fidelity_curve, select_subset, write_fidelity_csv, write_fidelity_mean_csv,
    CorrectnessMatrix, FidelityConfig, SubsetError, SubsetStrategy,
};

#[derive(Debug, Parser)]
#[command(name = "paretomerge", version, about = "Search merges of a long-reasoning and a short-answer checkpoint")]
pub struct Cli {
    /// Seed for the command's own randomness.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output location: a directory, or the checkpoint file for `merge`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Merge two checkpoints with one operator.
    Merge(MergeArgs),
    /// Evaluate the calibration pool and write its correctness matrix.
    Calibrate(CalibrateArgs),
    /// Select an evaluation subset from a calibration matrix.
    SampleSubset(SampleArgs),
    /// Run the NSGA-II search described by `--config`.
    Evolve,
    /// Measure how well subsets preserve candidate rankings.
    Fidelity(FidelityArgs),
    /// Per-benchmark accuracy and length reduction against a baseline.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    /// Simulated benchmark file (JSON array of items).
    #[arg(long, conflicts_with = "records")]
    pub benchmark: Option<PathBuf>,
    /// Seed of the default simulated benchmark.
    #[arg(long, default_value_t = 0)]
    pub generator_seed: u64,
    /// Per-item records (JSONL) from an external harness.
    #[arg(long)]
    pub records: Option<PathBuf>,
}

impl SourceArgs {
    fn source(&self) -> EvaluatorSource {
        match &self.records {
            Some(p) => EvaluatorSource::Records { record_path: p.clone() },
            None => EvaluatorSource::Simulated {
                benchmark_path: self.benchmark.clone(),
                generator_seed: self.generator_seed,
            },
        }
    }

    fn given(&self) -> bool {
        self.records.is_some() || self.benchmark.is_some()
    }
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    #[arg(long)]
    pub system2: PathBuf,
    #[arg(long)]
    pub system1: PathBuf,
    #[arg(long, value_parser = parse_kind)]
    pub op: MergeKind,
    /// Genotype values: `λ` for ta, `λ,k` for ties, `w2,w1` for linear.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    pub params: Vec<f64>,
    #[arg(long, default_value_t = LinearBounds::default().low)]
    pub linear_low: f64,
    #[arg(long, default_value_t = LinearBounds::default().high)]
    pub linear_high: f64,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Calibration pool size; coefficients are evenly spaced on [0, 1].
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub source: SourceArgs,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Calibration matrix; defaults to `<out>/calibration.json`.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long, default_value = "entropy", value_parser = parse_strategy)]
    pub strategy: SubsetStrategy,
    #[arg(long, default_value_t = 50)]
    pub size: usize,
}

#[derive(Debug, Args)]
pub struct FidelityArgs {
    #[arg(long, value_delimiter = ',', value_parser = parse_strategy)]
    pub strategies: Option<Vec<SubsetStrategy>>,
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Number of seeds, counted up from `--seed`.
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    /// Candidate coefficients ranked per seed.
    #[arg(long, default_value_t = 50)]
    pub models: usize,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long)]
    pub benchmark: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub generator_seed: u64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Records holding both candidates; item ids `bench/...` group by prefix.
    #[arg(long, conflicts_with = "run")]
    pub records: Option<PathBuf>,
    /// Run directory whose member is re-evaluated on every item.
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[arg(long)]
    pub candidate: String,
    /// Baseline candidate id; the run's System-2 endpoint when omitted with `--run`.
    #[arg(long)]
    pub baseline: Option<String>,
}

fn parse_kind(s: &str) -> Result<MergeKind, String> {
    s.parse()
}

fn parse_strategy(s: &str) -> Result<SubsetStrategy, String> {
    s.parse()
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Domain(String),
}

impl CliError {
    fn domain(e: impl Display) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(_) | RunError::Merge(MergeError::OutOfBounds { .. } | MergeError::Arity { .. }) => {
                CliError::Usage(e.to_string())
            }
            RunError::Subset(SubsetError::ZeroSize | SubsetError::Grid(_)) | RunError::Search(SearchError::Config(_)) => {
                CliError::Usage(e.to_string())
            }
            e => CliError::Domain(e.to_string()),
        }
    }
}

type CliResult = Result<(), CliError>;

/// Parse `args` (program name first), run the command and return the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.into()).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(CliError::domain(e)),
        },
        None => dispatch(&cli),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(CliError::Domain(m)) => {
            eprintln!("error: {m}");
            1
        }
    }
}

fn dispatch(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Merge(a) => cmd_merge(cli, a),
        Command::Calibrate(a) => cmd_calibrate(cli, a),
        Command::SampleSubset(a) => cmd_sample(cli, a),
        Command::Evolve => cmd_evolve(cli),
        Command::Fidelity(a) => cmd_fidelity(cli, a),
        Command::Report(a) => cmd_report(cli, a),
    }
}

fn load_config(cli: &Cli) -> Result<Option<RunConfig>, CliError> {
    match &cli.config {
        Some(p) => RunConfig::load(p).map(Some).map_err(|e| CliError::Usage(e.to_string())),
        None => Ok(None),
    }
}

fn out_dir(cli: &Cli, cfg: Option<&RunConfig>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.map(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn cmd_merge(cli: &Cli, a: &MergeArgs) -> CliResult {
    let out = cli.out.as_ref().ok_or_else(|| CliError::Usage("merge needs --out <file>".into()))?;
    let bounds = LinearBounds {
        low: a.linear_low,
        high: a.linear_high,
    };
    let genotype = Genotype {
        kind: a.op,
        values: a.params.clone(),
    };
    genotype.validate(bounds).map_err(|e| CliError::Usage(e.to_string()))?;
    let endpoints = MergeEndpoints::new(
        load_checkpoint(&a.system2).map_err(CliError::domain)?,
        load_checkpoint(&a.system1).map_err(CliError::domain)?,
    )
    .map_err(CliError::domain)?;
    let mut merged = decode_genotype(&genotype, &endpoints, bounds).map_err(CliError::domain)?;
    merged
        .metadata
        .insert("genotype".into(), serde_json::to_string(&genotype).expect("genotype serializes"));
    save_checkpoint(&merged, out).map_err(CliError::domain)?;
    for (name, t) in merged.tensors() {
        println!("{name}\t{}", t.len());
    }
    println!("{} tensors, {} parameters -> {}", merged.len(), merged.num_parameters(), out.display());
    Ok(())
}

fn report_pending(manifest: &Path, candidates: &[Candidate]) {
    println!(
        "pending: {} candidate(s) need external evaluation; manifest written to {}",
        candidates.len(),
        manifest.display()
    );
}

fn cmd_calibrate(cli: &Cli, a: &CalibrateArgs) -> CliResult {
    let cfg = load_config(cli)?;
    let k = a.k.or(cfg.as_ref().map(|c| c.calibration_k)).unwrap_or(10);
    if k < 2 {
        return Err(CliError::Usage(format!("--k must be at least 2, got {k}")));
    }
    let source = match &cfg {
        Some(c) if !a.source.given() => c.evaluator.clone(),
        _ => a.source.source(),
    };
    let merge = cfg.as_ref().map(|c| c.merge.clone()).unwrap_or_default();
    let out = out_dir(cli, cfg.as_ref());
    let evaluator = LoadedEvaluator::load(&source)?;
    match calibrate(&evaluator, k, &out, &merge)? {
        RunStatus::Complete(m) => {
            let path = out.join("calibration.json");
            m.save(&path).map_err(CliError::domain)?;
            println!("{} x {} calibration matrix -> {}", m.n_models(), m.n_items(), path.display());
        }
        RunStatus::Pending { manifest, candidates } => report_pending(&manifest, &candidates),
    }
    Ok(())
}

fn cmd_sample(cli: &Cli, a: &SampleArgs) -> CliResult {
    if a.size == 0 {
        return Err(CliError::Usage("--size must be at least 1".into()));
    }
    let out = out_dir(cli, None);
    let matrix_path = a.matrix.clone().unwrap_or_else(|| out.join("calibration.json"));
    let matrix = CorrectnessMatrix::load(&matrix_path).map_err(CliError::domain)?;
    let subset = select_subset(&matrix, a.strategy, a.size, cli.seed.unwrap_or(0)).map_err(|e| match e {
        SubsetError::SizeTooLarge { .. } => CliError::Usage(e.to_string()),
        e => CliError::domain(e),
    })?;
    let path = out.join("subset.json");
    subset.save(&path).map_err(CliError::domain)?;

    let stats: BTreeMap<String, f64> = item_stats(&matrix).into_iter().map(|s| (s.item_id, s.entropy)).collect();
    let mut h: Vec<f64> = subset.item_ids.iter().map(|id| stats[id]).collect();
    h.sort_by(f64::total_cmp);
    let median = if h.len() % 2 == 1 {
        h[h.len() / 2]
    } else {
        (h[h.len() / 2 - 1] + h[h.len() / 2]) / 2.0
    };
    println!(
        "{} items ({}) -> {}; entropy min {:.4} median {:.4} max {:.4}",
        subset.len(),
        a.strategy,
        path.display(),
        h[0],
        median,
        h[h.len() - 1]
    );
    Ok(())
}

fn print_front(members: &[HistoryEntry], baseline: Option<f64>) {
    println!("{:<10}  {:<24}  {:>8}  {:>11}  {:>10}", "candidate", "genotype", "acc %", "mean length", "reduction");
    for m in members {
        let reduction = baseline.map_or(String::from("-"), |b| format!("{:.1}%", crate::report::length_reduction(m.mean_length, b)));
        println!(
            "{:<10}  {:<24}  {:>8.1}  {:>11.1}  {:>10}",
            m.candidate_id,
            m.genotype.to_string(),
            100.0 * m.accuracy,
            m.mean_length,
            reduction
        );
    }
}

fn cmd_evolve(cli: &Cli) -> CliResult {
    let mut cfg = load_config(cli)?.unwrap_or_else(|| RunConfig::simulated("run"));
    if let Some(seed) = cli.seed {
        cfg.search.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    match run_evolve(&cfg)? {
        RunStatus::Complete(r) => {
            print_front(&r.outcome.front.members, r.baseline_length);
            println!(
                "{} candidates evaluated on {} items; run directory {}",
                r.outcome.history.len(),
                r.subset.len(),
                cfg.output_dir.display()
            );
        }
        RunStatus::Pending { manifest, candidates } => report_pending(&manifest, &candidates),
    }
    Ok(())
}

fn cmd_fidelity(cli: &Cli, a: &FidelityArgs) -> CliResult {
    let defaults = FidelityConfig::default();
    let base = cli.seed.unwrap_or(0);
    let cfg = FidelityConfig {
        strategies: a.strategies.clone().unwrap_or(defaults.strategies),
        sizes: a.sizes.clone().unwrap_or(defaults.sizes),
        n_models: a.models,
        seeds: (base..base + a.seeds).collect(),
        calibration_k: a.k,
    };
    if cfg.sizes.contains(&0) {
        return Err(CliError::Usage("subset sizes must be at least 1".into()));
    }
    if cfg.calibration_k < 2 {
        return Err(CliError::Usage(format!("--k must be at least 2, got {}", cfg.calibration_k)));
    }
    let bench = match &a.benchmark {
        Some(p) => SimulatedBenchmark::load(p, a.generator_seed).map_err(CliError::domain)?,
        None => SimulatedBenchmark::generate(&Default::default(), a.generator_seed),
    };
    let rows = rank_fidelity_curve(&bench, &cfg).map_err(|e| match e {
        SubsetError::SizeTooLarge { .. } | SubsetError::TooShort => CliError::Usage(e.to_string()),
        e => CliError::domain(e),
    })?;
    let means = aggregate_fidelity(&rows);
    let out = out_dir(cli, None);
    std::fs::create_dir_all(&out).map_err(CliError::domain)?;
    write_fidelity_csv(&out.join("fidelity.csv"), &rows).map_err(CliError::domain)?;
    write_fidelity_mean_csv(&out.join("fidelity_mean.csv"), &means).map_err(CliError::domain)?;
    println!("{:<13}  {:>5}  {:>8}", "strategy", "size", "mean rho");
    for m in &means {
        println!("{:<13}  {:>5}  {:>8.4}", m.strategy.to_string(), m.size, m.mean_rho);
    }
    println!("{} rows -> {}", rows.len(), out.join("fidelity.csv").display());
    Ok(())
}

fn group_by_prefix(outcomes: &[ItemOutcome]) -> BTreeMap<String, Vec<ItemOutcome>> {
    let mut groups: BTreeMap<String, Vec<ItemOutcome>> = BTreeMap::new();
    for o in outcomes {
        let name = o.item_id.split_once('/').map_or("all", |(p, _)| p);
        groups.entry(name.to_string()).or_default().push(o.clone());
    }
    groups
}

fn cmd_report(cli: &Cli, a: &ReportArgs) -> CliResult {
    let (candidate, baseline) = match (&a.records, &a.run) {
        (Some(path), None) => {
            let records = crate::evaluation::load_record_evaluations(path).map_err(CliError::domain)?;
            let base_id = a
                .baseline
                .as_ref()
                .ok_or_else(|| CliError::Usage("--records needs --baseline <candidate id>".into()))?;
            let get = |id: &str| {
                records
                    .get(id)
                    .map(<[ItemOutcome]>::to_vec)
                    .ok_or_else(|| CliError::Domain(format!("no records for candidate {id:?}")))
            };
            (get(&a.candidate)?, get(base_id)?)
        }
        (None, Some(dir)) => reevaluate_member(dir, &a.candidate, a.baseline.as_deref())?,
        _ => return Err(CliError::Usage("report needs exactly one of --records or --run".into())),
    };
    let report = build_report(&group_by_prefix(&candidate), &group_by_prefix(&baseline)).map_err(CliError::domain)?;
    println!("{report}");
    if let Some(out) = &cli.out {
        std::fs::create_dir_all(out).map_err(CliError::domain)?;
        let path = out.join("report.csv");
        let csv = report.to_csv().map_err(CliError::domain)?;
        crate::io::write_atomic(&path, csv.as_bytes()).map_err(CliError::domain)?;
        println!("-> {}", path.display());
    }
    Ok(())
}

/// Outcomes of a run's archived member and its baseline on every item.
fn reevaluate_member(
    dir: &Path,
    id: &str,
    baseline: Option<&str>,
) -> Result<(Vec<ItemOutcome>, Vec<ItemOutcome>), CliError> {
    let cfg = RunConfig::load(&dir.join("config.json")).map_err(|e| CliError::Usage(e.to_string()))?;
    let history_path = dir.join("history.jsonl");
    let mut history = Vec::new();
    for (line, text) in read_lines(&history_path).map_err(CliError::domain)? {
        let entry: HistoryEntry = serde_json::from_str(&text)
            .map_err(|e| CliError::Domain(format!("{}:{line}: {e}", history_path.display())))?;
        history.push(entry);
    }
    let find = |id: &str| {
        history
            .iter()
            .find(|h| h.candidate_id == id)
            .map(|h| Candidate::new(h.candidate_id.clone(), h.genotype.clone()))
    };
    let member = find(id).ok_or_else(|| CliError::Domain(format!("{id:?} is not in {}", history_path.display())))?;
    let base = match baseline.or(cfg.baseline_candidate.as_deref()) {
        Some(b) => find(b).unwrap_or_else(|| Candidate::new(b, Genotype::ta(0.0))),
        None => Candidate::new("system2", Genotype::ta(0.0)),
    };
    let evaluator = LoadedEvaluator::load(&cfg.evaluator)?;
    let eval = |c: &Candidate| evaluator.evaluate(c, None).map_err(CliError::domain);
    Ok((eval(&member)?, eval(&base)?))
}
