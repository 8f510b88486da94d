//! NSGA-II over merge genotypes.
//!
//! Starting from `N` uniformly drawn genotypes, each generation breeds `N`
//! offspring by binary tournament, SBX and polynomial mutation, pools them
//! with the parents and keeps the best `N` by non-domination rank and
//! crowding distance. Every evaluated candidate is archived; the returned
//! front is the non-dominated subset of that archive.
//!
//! Randomness comes from [`crate::rng`] streams keyed by
//! `(seed, generation, operator, index)`, and offspring are evaluated in
//! parallel with results reassembled by index, so a run is a pure function of
//! its [`SearchConfig`] and evaluator.

mod operators;
mod sort;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{Candidate, EvalError, Fitness, ObjectiveVector};
use crate::merge::{Genotype, LinearBounds, MergeKind};
use crate::rng::{stream, Stream};

pub use operators::{
    crowded_winner, polynomial_mutation, polynomial_perturb, sbx_beta, sbx_children, sbx_crossover, tournament_select,
    MutationConfig, SbxConfig,
};
pub use sort::{crowding_distance, dominates, fast_nondominated_sort, hypervolume_2d, pareto_indices};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search config: {0}")]
    Config(String),
    #[error("generation {generation}: {} candidate evaluation(s) failed, first: {}", failures.len(), failures[0].1)]
    Evaluation {
        generation: usize,
        history: Vec<HistoryEntry>,
        failures: Vec<(Candidate, EvalError)>,
    },
    #[error("persisting search state: {0}")]
    Persist(#[from] std::io::Error),
    #[error("cannot extract a front from an empty history")]
    EmptyHistory,
}

fn default_population() -> usize {
    20
}

fn default_generations() -> usize {
    10
}

fn default_kind() -> MergeKind {
    MergeKind::Ta
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    #[serde(default = "default_population")]
    pub population_size: usize,
    #[serde(default = "default_generations")]
    pub generations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_kind")]
    pub kind: MergeKind,
    #[serde(default)]
    pub sbx: SbxConfig,
    #[serde(default)]
    pub mutation: MutationConfig,
    /// Per-variable `(low, high)`. Derived from `kind` when absent.
    #[serde(default)]
    pub genotype_bounds: Option<Vec<(f64, f64)>>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            population_size: default_population(),
            generations: default_generations(),
            seed: 0,
            kind: MergeKind::Ta,
            sbx: SbxConfig::default(),
            mutation: MutationConfig::default(),
            genotype_bounds: None,
        }
    }
}

impl SearchConfig {
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.genotype_bounds
            .clone()
            .unwrap_or_else(|| Genotype::default_bounds(self.kind, LinearBounds::default()))
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: String| Err(SearchError::Config(m));
        if self.population_size < 4 || self.population_size % 2 != 0 {
            return bad(format!("population size must be even and at least 4, got {}", self.population_size));
        }
        if self.generations < 1 {
            return bad("at least one generation is required".into());
        }
        if !(0.0..=1.0).contains(&self.sbx.probability) || !(self.sbx.distribution_index > 0.0) {
            return bad("crossover probability must be in [0, 1] and its distribution index positive".into());
        }
        if let Some(p) = self.mutation.per_variable_probability {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("mutation probability {p} outside [0, 1]"));
            }
        }
        if !(self.mutation.distribution_index > 0.0) {
            return bad("mutation distribution index must be positive".into());
        }
        let bounds = self.bounds();
        if bounds.len() != self.kind.arity() {
            return bad(format!("{} genotypes have {} variables, got {} bounds", self.kind, self.kind.arity(), bounds.len()));
        }
        if let Some((lo, hi)) = bounds.iter().find(|(lo, hi)| !(lo < hi)) {
            return bad(format!("bound ({lo}, {hi}) must satisfy low < high"));
        }
        Ok(())
    }

    /// Upper bound on evaluations: `N * (T + 1)`.
    pub fn evaluation_budget(&self) -> usize {
        self.population_size * (self.generations + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub candidate: Candidate,
    pub objectives: Option<ObjectiveVector>,
    /// Front index from the last sort.
    pub rank: Option<usize>,
    pub crowding: Option<f64>,
}

impl Individual {
    fn fitness(&self) -> Fitness {
        self.objectives.expect("evaluated before sorting").fitness()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub individuals: Vec<Individual>,
    pub generation: usize,
}

/// One evaluated candidate, as written to `history.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub generation: usize,
    pub candidate_id: String,
    pub genotype: Genotype,
    pub accuracy: f64,
    pub mean_length: f64,
    pub fitness: Fitness,
}

impl HistoryEntry {
    pub fn new(generation: usize, candidate: &Candidate, objectives: ObjectiveVector) -> Self {
        Self {
            generation,
            candidate_id: candidate.candidate_id.clone(),
            genotype: candidate.genotype.clone(),
            accuracy: objectives.accuracy,
            mean_length: objectives.mean_length,
            fitness: objectives.fitness(),
        }
    }

    pub fn objectives(&self) -> ObjectiveVector {
        ObjectiveVector {
            accuracy: self.accuracy,
            mean_length: self.mean_length,
        }
    }
}

/// Mutually non-dominated members sorted by `fitness[0]` ascending, i.e. by
/// accuracy descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub members: Vec<HistoryEntry>,
}

impl ParetoFront {
    pub fn fitness(&self) -> Vec<Fitness> {
        self.members.iter().map(|m| m.fitness).collect()
    }

    pub fn hypervolume(&self, reference: Fitness) -> f64 {
        hypervolume_2d(&self.fitness(), reference)
    }
}

pub fn extract_pareto(history: &[HistoryEntry]) -> Result<ParetoFront, SearchError> {
    if history.is_empty() {
        return Err(SearchError::EmptyHistory);
    }
    let points: Vec<Fitness> = history.iter().map(|h| h.fitness).collect();
    Ok(ParetoFront {
        members: pareto_indices(&points).into_iter().map(|i| history[i].clone()).collect(),
    })
}

/// Snapshot handed to the observer after every completed generation.
pub struct SearchProgress<'a> {
    pub generation: usize,
    pub history: &'a [HistoryEntry],
    pub population: &'a Population,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub front: ParetoFront,
    pub history: Vec<HistoryEntry>,
    pub population: Population,
}

pub fn candidate_id(generation: usize, index: usize) -> String {
    format!("g{generation:03}-{index:03}")
}

/// Assign front ranks and per-front crowding distances in place.
pub fn assign_rank_and_crowding(individuals: &mut [Individual]) {
    let points: Vec<Fitness> = individuals.iter().map(Individual::fitness).collect();
    for (rank, front) in fast_nondominated_sort(&points).into_iter().enumerate() {
        let front_pts: Vec<Fitness> = front.iter().map(|&i| points[i]).collect();
        for (&i, d) in front.iter().zip(crowding_distance(&front_pts)) {
            individuals[i].rank = Some(rank);
            individuals[i].crowding = Some(d);
        }
    }
}

/// Keep `n` of `pool` by rank, breaking the last admitted front by crowding
/// (descending) and then pool position.
pub fn environmental_selection(mut pool: Vec<Individual>, n: usize) -> Vec<Individual> {
    assign_rank_and_crowding(&mut pool);
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&pool[i], &pool[j]);
        a.rank
            .cmp(&b.rank)
            .then(b.crowding.unwrap().total_cmp(&a.crowding.unwrap()))
            .then(i.cmp(&j))
    });
    order.truncate(n);
    order.sort_unstable();
    let mut slots: Vec<Option<Individual>> = pool.into_iter().map(Some).collect();
    order.into_iter().map(|i| slots[i].take().unwrap()).collect()
}

fn evaluate_batch<F>(
    generation: usize,
    candidates: Vec<Candidate>,
    evaluate: &F,
    history: &mut Vec<HistoryEntry>,
) -> Result<Vec<Individual>, SearchError>
where
    F: Fn(&Candidate) -> Result<ObjectiveVector, EvalError> + Sync,
{
    let results: Vec<Result<ObjectiveVector, EvalError>> = candidates.par_iter().map(evaluate).collect();
    let mut failures = Vec::new();
    let mut individuals = Vec::with_capacity(candidates.len());
    for (candidate, result) in candidates.into_iter().zip(results) {
        match result {
            Ok(obj) => {
                history.push(HistoryEntry::new(generation, &candidate, obj));
                individuals.push(Individual {
                    candidate,
                    objectives: Some(obj),
                    rank: None,
                    crowding: None,
                });
            }
            Err(e) => failures.push((candidate, e)),
        }
    }
    if failures.is_empty() {
        Ok(individuals)
    } else {
        Err(SearchError::Evaluation {
            generation,
            history: std::mem::take(history),
            failures,
        })
    }
}

pub fn run_nsga2<F>(cfg: &SearchConfig, evaluate: F) -> Result<SearchOutcome, SearchError>
where
    F: Fn(&Candidate) -> Result<ObjectiveVector, EvalError> + Sync,
{
    run_nsga2_observed(cfg, evaluate, |_| Ok(()))
}

pub fn run_nsga2_observed<F, O>(cfg: &SearchConfig, evaluate: F, mut observer: O) -> Result<SearchOutcome, SearchError>
where
    F: Fn(&Candidate) -> Result<ObjectiveVector, EvalError> + Sync,
    O: FnMut(&SearchProgress<'_>) -> std::io::Result<()>,
{
    cfg.validate()?;
    let n = cfg.population_size;
    let bounds = cfg.bounds();
    let mut history = Vec::with_capacity(cfg.evaluation_budget());

    let initial: Vec<Candidate> = (0..n)
        .map(|i| {
            let mut r = stream(cfg.seed, 0, Stream::Init, i as u64);
            let values = bounds.iter().map(|&(lo, hi)| r.gen_range(lo..=hi)).collect();
            Candidate::new(candidate_id(0, i), Genotype { kind: cfg.kind, values })
        })
        .collect();
    let mut individuals = evaluate_batch(0, initial, &evaluate, &mut history)?;
    assign_rank_and_crowding(&mut individuals);
    let mut population = Population {
        individuals,
        generation: 0,
    };
    observer(&SearchProgress {
        generation: 0,
        history: &history,
        population: &population,
    })?;

    for g in 1..=cfg.generations {
        let gen = g as u64;
        let parents = &population.individuals;
        let mut offspring = Vec::with_capacity(n);
        for pair in 0..n / 2 {
            let k = pair as u64;
            let a = tournament_select(parents, &mut stream(cfg.seed, gen, Stream::Select, 2 * k))?;
            let b = tournament_select(parents, &mut stream(cfg.seed, gen, Stream::Select, 2 * k + 1))?;
            let (c1, c2) = sbx_crossover(
                &parents[a].candidate.genotype,
                &parents[b].candidate.genotype,
                &cfg.sbx,
                &bounds,
                &mut stream(cfg.seed, gen, Stream::Crossover, k),
            )?;
            let c1 = polynomial_mutation(&c1, &cfg.mutation, &bounds, &mut stream(cfg.seed, gen, Stream::Mutate, 2 * k));
            let c2 = polynomial_mutation(&c2, &cfg.mutation, &bounds, &mut stream(cfg.seed, gen, Stream::Mutate, 2 * k + 1));
            offspring.push(Candidate::new(candidate_id(g, 2 * pair), c1));
            offspring.push(Candidate::new(candidate_id(g, 2 * pair + 1), c2));
        }
        let children = evaluate_batch(g, offspring, &evaluate, &mut history)?;
        let mut pool = std::mem::take(&mut population.individuals);
        pool.extend(children);
        population = Population {
            individuals: environmental_selection(pool, n),
            generation: g,
        };
        observer(&SearchProgress {
            generation: g,
            history: &history,
            population: &population,
        })?;
    }

    let front = extract_pareto(&history)?;
    Ok(SearchOutcome {
        front,
        history,
        population,
    })
}
