//! Variation and selection operators on real-valued genotypes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Individual, SearchError};
use crate::merge::Genotype;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbxConfig {
    pub probability: f64,
    pub distribution_index: f64,
}

impl Default for SbxConfig {
    fn default() -> Self {
        Self {
            probability: 0.9,
            distribution_index: 15.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutationConfig {
    /// Defaults to `1 / number of variables` when absent.
    #[serde(default)]
    pub per_variable_probability: Option<f64>,
    pub distribution_index: f64,
}

impl Default for MutationConfig {
    fn default() -> Self {
        Self {
            per_variable_probability: None,
            distribution_index: 20.0,
        }
    }
}

/// SBX spread factor for a uniform draw `u` in `[0, 1)`.
pub fn sbx_beta(u: f64, eta: f64) -> f64 {
    let exp = 1.0 / (eta + 1.0);
    if u <= 0.5 {
        (2.0 * u).powf(exp)
    } else {
        (1.0 / (2.0 * (1.0 - u))).powf(exp)
    }
}

/// Children of one variable for a given draw, before clamping.
pub fn sbx_children(x1: f64, x2: f64, u: f64, eta: f64) -> (f64, f64) {
    if x1 == x2 {
        return (x1, x2);
    }
    let beta = sbx_beta(u, eta);
    (
        0.5 * ((1.0 + beta) * x1 + (1.0 - beta) * x2),
        0.5 * ((1.0 - beta) * x1 + (1.0 + beta) * x2),
    )
}

pub fn sbx_crossover<R: Rng>(
    p1: &Genotype,
    p2: &Genotype,
    cfg: &SbxConfig,
    bounds: &[(f64, f64)],
    rng: &mut R,
) -> Result<(Genotype, Genotype), SearchError> {
    if p1.kind != p2.kind || p1.values.len() != p2.values.len() || p1.values.len() != bounds.len() {
        return Err(SearchError::Config(format!("cannot cross {p1} with {p2}")));
    }
    let (mut c1, mut c2) = (p1.clone(), p2.clone());
    if rng.gen::<f64>() >= cfg.probability {
        return Ok((c1, c2));
    }
    for (v, &(lo, hi)) in bounds.iter().enumerate() {
        let u: f64 = rng.gen();
        let (a, b) = sbx_children(p1.values[v], p2.values[v], u, cfg.distribution_index);
        c1.values[v] = a.clamp(lo, hi);
        c2.values[v] = b.clamp(lo, hi);
    }
    Ok((c1, c2))
}

/// Bounded polynomial perturbation of `x` for a uniform draw `u`.
pub fn polynomial_perturb(x: f64, lo: f64, hi: f64, u: f64, eta: f64) -> f64 {
    let span = hi - lo;
    if span <= 0.0 {
        return x;
    }
    let d1 = (x - lo) / span;
    let d2 = (hi - x) / span;
    let pow = 1.0 / (eta + 1.0);
    let dq = if u < 0.5 {
        let val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta + 1.0);
        val.powf(pow) - 1.0
    } else {
        let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta + 1.0);
        1.0 - val.powf(pow)
    };
    (x + dq * span).clamp(lo, hi)
}

pub fn polynomial_mutation<R: Rng>(g: &Genotype, cfg: &MutationConfig, bounds: &[(f64, f64)], rng: &mut R) -> Genotype {
    let p = cfg
        .per_variable_probability
        .unwrap_or(1.0 / bounds.len().max(1) as f64);
    let mut out = g.clone();
    for (v, &(lo, hi)) in bounds.iter().enumerate() {
        if rng.gen::<f64>() < p {
            let u: f64 = rng.gen();
            out.values[v] = polynomial_perturb(out.values[v], lo, hi, u, cfg.distribution_index);
        }
    }
    out
}

/// Crowded comparison: lower rank wins, then larger crowding, then the lower
/// population index.
pub fn crowded_winner(pop: &[Individual], i: usize, j: usize) -> Result<usize, SearchError> {
    let key = |k: usize| {
        let ind = &pop[k];
        match (ind.rank, ind.crowding) {
            (Some(r), Some(c)) => Ok((r, c)),
            _ => Err(SearchError::Config(format!(
                "individual {} has no rank/crowding yet",
                ind.candidate.candidate_id
            ))),
        }
    };
    let (ri, ci) = key(i)?;
    let (rj, cj) = key(j)?;
    let better_i = ri < rj || (ri == rj && (ci > cj || (ci == cj && i < j)));
    Ok(if better_i { i } else { j })
}

/// Binary tournament between two distinct, uniformly drawn members. Returns
/// the winner's index.
pub fn tournament_select<R: Rng>(pop: &[Individual], rng: &mut R) -> Result<usize, SearchError> {
    let n = pop.len();
    if n < 2 {
        return Err(SearchError::Config("tournament needs at least two individuals".into()));
    }
    let i = rng.gen_range(0..n);
    let mut j = rng.gen_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    crowded_winner(pop, i, j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::Candidate;
    use crate::rng::{stream, Stream};
    use proptest::prelude::*;

    fn ind(rank: usize, crowding: f64) -> Individual {
        Individual {
            candidate: Candidate::new("x", Genotype::ta(0.5)),
            objectives: None,
            rank: Some(rank),
            crowding: Some(crowding),
        }
    }

    #[test]
    fn crowded_comparison_examples() {
        let pop = vec![ind(1, 5.0), ind(0, 0.1)];
        assert_eq!(crowded_winner(&pop, 0, 1).unwrap(), 1);
        let pop = vec![ind(0, 2.0), ind(0, f64::INFINITY)];
        assert_eq!(crowded_winner(&pop, 0, 1).unwrap(), 1);
        let pop = vec![ind(0, 2.0), ind(0, 2.0)];
        assert_eq!(crowded_winner(&pop, 1, 0).unwrap(), 0);
        assert_eq!(crowded_winner(&pop, 0, 1).unwrap(), 0);
    }

    #[test]
    fn tournament_requires_rank() {
        let mut pop = vec![ind(0, 1.0), ind(0, 1.0)];
        pop[1].rank = None;
        let mut r = stream(0, 0, Stream::Select, 0);
        assert!(tournament_select(&pop, &mut r).is_err());
    }

    #[test]
    fn tournament_draws_distinct() {
        let pop = vec![ind(0, 1.0), ind(1, 1.0)];
        for k in 0..50 {
            let mut r = stream(1, 0, Stream::Select, k);
            // the only distinct pair always contains the rank-0 individual
            assert_eq!(tournament_select(&pop, &mut r).unwrap(), 0);
        }
    }

    #[test]
    fn sbx_examples() {
        let (a, b) = sbx_children(0.2, 0.7, 0.5, 15.0);
        assert_eq!((a, b), (0.2, 0.7));
        for u in [0.0, 0.1, 0.5, 0.9, 0.999] {
            assert_eq!(sbx_children(0.4, 0.4, u, 15.0), (0.4, 0.4));
        }
        let bounds = [(0.0, 1.0)];
        let cfg = SbxConfig {
            probability: 0.0,
            distribution_index: 15.0,
        };
        let mut r = stream(0, 0, Stream::Crossover, 0);
        let (c1, c2) = sbx_crossover(&Genotype::ta(0.1), &Genotype::ta(0.9), &cfg, &bounds, &mut r).unwrap();
        assert_eq!((c1.values[0], c2.values[0]), (0.1, 0.9));
        assert!(sbx_crossover(&Genotype::ta(0.1), &Genotype::ties(0.1, 0.5), &cfg, &bounds, &mut r).is_err());
    }

    #[test]
    fn sbx_preserves_midpoint() {
        for u in [0.05, 0.3, 0.7, 0.95] {
            let (a, b) = sbx_children(0.2, 0.6, u, 15.0);
            assert!(((a + b) / 2.0 - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn mutation_examples() {
        let cfg = MutationConfig {
            per_variable_probability: Some(0.0),
            distribution_index: 20.0,
        };
        let g = Genotype::ties(0.3, 0.6);
        let mut r = stream(0, 0, Stream::Mutate, 0);
        assert_eq!(polynomial_mutation(&g, &cfg, &[(0.0, 1.0), (0.01, 1.0)], &mut r), g);
        // u < 0.5 pushes downward; at the lower bound it must stay there
        assert_eq!(polynomial_perturb(0.0, 0.0, 1.0, 0.01, 20.0), 0.0);
        assert!(polynomial_perturb(0.5, 0.0, 1.0, 0.01, 20.0) < 0.5);
        assert!(polynomial_perturb(0.5, 0.0, 1.0, 0.99, 20.0) > 0.5);
        assert_eq!(polynomial_perturb(0.5, 0.0, 1.0, 0.5, 20.0), 0.5);
    }

    #[test]
    fn mutation_sweep_respects_invariants() {
        let bounds = [(0.0, 1.0), (crate::merge::MIN_DENSITY, 1.0)];
        let cfg = MutationConfig {
            per_variable_probability: Some(1.0),
            distribution_index: 20.0,
        };
        let mut r = stream(9, 0, Stream::Mutate, 0);
        let mut g = Genotype::ties(0.0, crate::merge::MIN_DENSITY);
        for _ in 0..10_000 {
            g = polynomial_mutation(&g, &cfg, &bounds, &mut r);
            assert!(g.validate(Default::default()).is_ok(), "{g}");
        }
    }

    proptest! {
        #[test]
        fn sbx_children_stay_in_bounds(x1 in 0.0f64..=1.0, x2 in 0.0f64..=1.0, seed in any::<u64>()) {
            let mut r = stream(seed, 0, Stream::Crossover, 0);
            let cfg = SbxConfig { probability: 1.0, distribution_index: 2.0 };
            let (a, b) = sbx_crossover(&Genotype::ta(x1), &Genotype::ta(x2), &cfg, &[(0.0, 1.0)], &mut r).unwrap();
            prop_assert!((0.0..=1.0).contains(&a.values[0]));
            prop_assert!((0.0..=1.0).contains(&b.values[0]));
        }
    }
}
