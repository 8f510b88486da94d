//! Two-endpoint merge operators.
//!
//! The slow, verbose endpoint is called `system2` and the fast, concise one
//! `system1`. Every operator works elementwise in f32 and processes tensors
//! independently, so output never depends on thread scheduling.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checkpoint::{check_compatible, Checkpoint, CompatibilityReport, Tensor};

#[derive(Debug, Error)]
pub enum MergeError {
    #[error("endpoints are not architecturally compatible: {0}")]
    Incompatible(CompatibilityReport),
    #[error("{param} = {value} outside [{low}, {high}]")]
    OutOfBounds {
        param: &'static str,
        value: f64,
        low: f64,
        high: f64,
    },
    #[error("{param} = {value} must satisfy {constraint}")]
    Constraint {
        param: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("{kind} genotype takes {expected} values, got {got}")]
    Arity { kind: MergeKind, expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MergeKind {
    /// Task arithmetic, genotype `[lambda]`.
    Ta,
    /// Magnitude-trimmed displacement, genotype `[lambda, density]`.
    Ties,
    /// Free weighted sum, genotype `[w_system2, w_system1]`.
    Linear,
}

impl MergeKind {
    pub fn arity(self) -> usize {
        match self {
            MergeKind::Ta => 1,
            MergeKind::Ties | MergeKind::Linear => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MergeKind::Ta => "ta",
            MergeKind::Ties => "ties",
            MergeKind::Linear => "linear",
        }
    }
}

impl fmt::Display for MergeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MergeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ta" => Ok(MergeKind::Ta),
            "ties" => Ok(MergeKind::Ties),
            "linear" => Ok(MergeKind::Linear),
            other => Err(format!("unknown merge op {other:?} (expected ta, ties or linear)")),
        }
    }
}

/// Box for each weight of a [`MergeKind::Linear`] genotype.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearBounds {
    pub low: f64,
    pub high: f64,
}

impl Default for LinearBounds {
    fn default() -> Self {
        Self { low: 0.0, high: 1.5 }
    }
}

/// Smallest density a search may propose. Density must stay strictly positive.
pub const MIN_DENSITY: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genotype {
    pub kind: MergeKind,
    pub values: Vec<f64>,
}

impl Genotype {
    pub fn ta(lambda: f64) -> Self {
        Self {
            kind: MergeKind::Ta,
            values: vec![lambda],
        }
    }

    pub fn ties(lambda: f64, density: f64) -> Self {
        Self {
            kind: MergeKind::Ties,
            values: vec![lambda, density],
        }
    }

    pub fn linear(w_system2: f64, w_system1: f64) -> Self {
        Self {
            kind: MergeKind::Linear,
            values: vec![w_system2, w_system1],
        }
    }

    pub fn validate(&self, linear: LinearBounds) -> Result<(), MergeError> {
        if self.values.len() != self.kind.arity() {
            return Err(MergeError::Arity {
                kind: self.kind,
                expected: self.kind.arity(),
                got: self.values.len(),
            });
        }
        match self.kind {
            MergeKind::Ta => check_lambda(self.values[0]),
            MergeKind::Ties => {
                check_lambda(self.values[0])?;
                check_density(self.values[1])
            }
            MergeKind::Linear => {
                check_range("w_system2", self.values[0], linear.low, linear.high)?;
                check_range("w_system1", self.values[1], linear.low, linear.high)
            }
        }
    }

    /// Search box matching the genotype invariants of `kind`.
    pub fn default_bounds(kind: MergeKind, linear: LinearBounds) -> Vec<(f64, f64)> {
        match kind {
            MergeKind::Ta => vec![(0.0, 1.0)],
            MergeKind::Ties => vec![(0.0, 1.0), (MIN_DENSITY, 1.0)],
            MergeKind::Linear => vec![(linear.low, linear.high); 2],
        }
    }
}

impl fmt::Display for Genotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.kind)?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v:.4}")?;
        }
        write!(f, ")")
    }
}

fn check_range(param: &'static str, value: f64, low: f64, high: f64) -> Result<(), MergeError> {
    if value.is_finite() && (low..=high).contains(&value) {
        Ok(())
    } else {
        Err(MergeError::OutOfBounds { param, value, low, high })
    }
}

fn check_lambda(lambda: f64) -> Result<(), MergeError> {
    check_range("lambda", lambda, 0.0, 1.0)
}

fn check_density(k: f64) -> Result<(), MergeError> {
    if k.is_finite() && k > 0.0 && k <= 1.0 {
        Ok(())
    } else {
        Err(MergeError::Constraint {
            param: "density",
            value: k,
            constraint: "0 < density <= 1",
        })
    }
}

/// A validated, architecturally compatible pair of checkpoints.
#[derive(Debug, Clone)]
pub struct MergeEndpoints {
    system2: Checkpoint,
    system1: Checkpoint,
}

impl MergeEndpoints {
    pub fn new(system2: Checkpoint, system1: Checkpoint) -> Result<Self, MergeError> {
        let report = check_compatible(&system2, &system1);
        if !report.is_compatible() {
            return Err(MergeError::Incompatible(report));
        }
        Ok(Self { system2, system1 })
    }

    pub fn system2(&self) -> &Checkpoint {
        &self.system2
    }

    pub fn system1(&self) -> &Checkpoint {
        &self.system1
    }

    /// Apply `op` to every aligned tensor pair, in parallel, reassembled by name.
    fn zip_map<F>(&self, op: F) -> Checkpoint
    where
        F: Fn(&[f32], &[f32]) -> Vec<f32> + Sync,
    {
        let pairs: Vec<(&str, &Tensor, &Tensor)> = self
            .system2
            .tensors()
            .map(|(name, a)| (name, a, self.system1.get(name).expect("compatibility checked")))
            .collect();
        let tensors: BTreeMap<String, Tensor> = pairs
            .into_par_iter()
            .map(|(name, a, b)| (name.to_string(), a.with_data(op(a.data(), b.data()))))
            .collect();
        Checkpoint::from_parts(tensors, BTreeMap::new())
    }
}

/// `(1 - lambda) * a + lambda * b`, exact at both endpoints and clamped to
/// the segment so rounding never leaves the hull of the two inputs.
#[inline]
pub fn interpolate(a: f32, b: f32, lambda: f32) -> f32 {
    if lambda == 0.0 {
        a
    } else if lambda == 1.0 {
        b
    } else {
        let v = (1.0 - lambda) * a + lambda * b;
        v.clamp(a.min(b), a.max(b))
    }
}

/// `system1 - system2`, tensor by tensor.
pub fn compute_displacement(endpoints: &MergeEndpoints) -> Checkpoint {
    endpoints.zip_map(|a, b| a.iter().zip(b).map(|(x, y)| y - x).collect())
}

pub fn merge_task_arithmetic(endpoints: &MergeEndpoints, lambda: f64) -> Result<Checkpoint, MergeError> {
    check_lambda(lambda)?;
    let lam = lambda as f32;
    Ok(endpoints.zip_map(|a, b| a.iter().zip(b).map(|(&x, &y)| interpolate(x, y, lam)).collect()))
}

/// Number of displacement entries a density of `k` keeps out of `n`:
/// `ceil(k * n)`, with a relative slack of 1e-12 so products such as
/// `0.3 * 10` that round just above an integer do not gain an entry.
pub fn retained_count(k: f64, n: usize) -> usize {
    let raw = k * n as f64;
    let c = (raw - 1e-12 * raw.max(1.0)).ceil();
    (c.max(1.0) as usize).min(n)
}

/// Mask of the `retained_count(k, n)` largest-magnitude entries. Equal
/// magnitudes keep the lower flat index first.
pub fn top_magnitude_mask(tau: &[f32], k: f64) -> Vec<bool> {
    let n = tau.len();
    let keep = retained_count(k, n);
    let mut mask = vec![false; n];
    if keep == n {
        mask.fill(true);
        return mask;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let by_magnitude = |&i: &usize, &j: &usize| tau[j].abs().total_cmp(&tau[i].abs()).then(i.cmp(&j));
    idx.select_nth_unstable_by(keep - 1, by_magnitude);
    for &i in &idx[..keep] {
        mask[i] = true;
    }
    mask
}

/// Displacement with all but the top-`k` fraction of entries zeroed.
pub fn trim_displacement(tau: &[f32], k: f64) -> Vec<f32> {
    top_magnitude_mask(tau, k)
        .into_iter()
        .zip(tau)
        .map(|(keep, &t)| if keep { t } else { 0.0 })
        .collect()
}

/// `system2 + lambda * trim(tau, k)` per tensor.
///
/// Retained entries go through [`interpolate`], dropped entries copy
/// `system2`, which is the same quantity evaluated so that `k = 1`
/// reproduces [`merge_task_arithmetic`] bit for bit.
pub fn merge_ties(endpoints: &MergeEndpoints, lambda: f64, k: f64) -> Result<Checkpoint, MergeError> {
    check_lambda(lambda)?;
    check_density(k)?;
    let lam = lambda as f32;
    Ok(endpoints.zip_map(|a, b| {
        let tau: Vec<f32> = a.iter().zip(b).map(|(x, y)| y - x).collect();
        let mask = top_magnitude_mask(&tau, k);
        a.iter()
            .zip(b)
            .zip(mask)
            .map(|((&x, &y), keep)| if keep { interpolate(x, y, lam) } else { x })
            .collect()
    }))
}

pub fn merge_linear(
    endpoints: &MergeEndpoints,
    w_system2: f64,
    w_system1: f64,
    bounds: LinearBounds,
) -> Result<Checkpoint, MergeError> {
    check_range("w_system2", w_system2, bounds.low, bounds.high)?;
    check_range("w_system1", w_system1, bounds.low, bounds.high)?;
    let (w2, w1) = (w_system2 as f32, w_system1 as f32);
    Ok(endpoints.zip_map(|a, b| {
        a.iter()
            .zip(b)
            .map(|(&x, &y)| {
                if w1 == 0.0 {
                    w2 * x
                } else if w2 == 0.0 {
                    w1 * y
                } else {
                    w2 * x + w1 * y
                }
            })
            .collect()
    }))
}

pub fn decode_genotype(g: &Genotype, endpoints: &MergeEndpoints, linear: LinearBounds) -> Result<Checkpoint, MergeError> {
    g.validate(linear)?;
    let v = &g.values;
    match g.kind {
        MergeKind::Ta => merge_task_arithmetic(endpoints, v[0]),
        MergeKind::Ties => merge_ties(endpoints, v[0], v[1]),
        MergeKind::Linear => merge_linear(endpoints, v[0], v[1], linear),
    }
}
