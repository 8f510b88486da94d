//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use paretomerge::evaluation::Fitness;
use paretomerge::{Checkpoint, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `(p, H(p))` at `p = i / 1000`, with `H` computed offline at 50 digits.
pub fn entropy_grid() -> Vec<(f64, f64)> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/entropy_grid.txt");
    std::fs::read_to_string(path)
        .expect("entropy grid fixture")
        .lines()
        .enumerate()
        .map(|(i, l)| (i as f64 / 1000.0, l.trim().parse().expect("decimal")))
        .collect()
}

fn dominates(a: &Fitness, b: &Fitness) -> bool {
    a[0] <= b[0] && a[1] <= b[1] && (a[0] < b[0] || a[1] < b[1])
}

/// Peel off non-dominated layers by pairwise comparison against everything
/// still unassigned.
pub fn brute_force_fronts(points: &[Fitness]) -> Vec<Vec<usize>> {
    let mut left: Vec<usize> = (0..points.len()).collect();
    let mut fronts = Vec::new();
    while !left.is_empty() {
        let (front, rest): (Vec<usize>, Vec<usize>) = left
            .iter()
            .partition(|&&i| !left.iter().any(|&j| dominates(&points[j], &points[i])));
        fronts.push(front);
        left = rest;
    }
    fronts
}

/// Random 2-objective points; small integer grids force ties and duplicates.
pub fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Fitness> {
    let coarse = rng.gen_bool(0.5);
    (0..n)
        .map(|_| {
            if coarse {
                [f64::from(rng.gen_range(0..10u8)), f64::from(rng.gen_range(0..10u8))]
            } else {
                [rng.gen::<f64>(), rng.gen::<f64>()]
            }
        })
        .collect()
}

/// Two compatible checkpoints with `params` values spread over `tensors`
/// tensors, sprinkled with signed zeros and wide magnitudes.
pub fn checkpoint_pair(seed: u64, params: usize, tensors: usize) -> (Checkpoint, Checkpoint) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Checkpoint::new();
    let mut b = Checkpoint::new();
    let base = params / tensors;
    for t in 0..tensors {
        let n = if t + 1 == tensors { params - base * (tensors - 1) } else { base };
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f32> {
            (0..n)
                .map(|_| match rng.gen_range(0..50u8) {
                    0 => -0.0,
                    1 => 0.0,
                    2 => rng.gen_range(-1e30f32..1e30),
                    _ => rng.gen_range(-2.0f32..2.0),
                })
                .collect()
        };
        let (da, db) = (draw(&mut rng), draw(&mut rng));
        let name = format!("layers.{t}.weight");
        a.insert(name.clone(), Tensor::new(vec![n], da).unwrap()).unwrap();
        b.insert(name, Tensor::new(vec![n], db).unwrap()).unwrap();
    }
    (a, b)
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_paretomerge"))
}

/// Run the binary in `dir`.
pub fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin()).current_dir(dir).args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}
