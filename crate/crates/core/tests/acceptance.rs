//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero when any
//! criterion fails.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use paretomerge::evaluation::{Evaluator, SimulatedBenchmark, SimulatedEvaluator};
use paretomerge::merge::{merge_linear, merge_task_arithmetic, merge_ties, LinearBounds, MergeEndpoints};
use paretomerge::moea::{extract_pareto, fast_nondominated_sort, HistoryEntry, ParetoFront};
use paretomerge::sampling::{
    aggregate_fidelity, bernoulli_entropy, expected_distinction, rank_fidelity_curve, EvaluationSubset, FidelityConfig,
    SubsetStrategy,
};
use paretomerge::{Candidate, Checkpoint, Genotype};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn within(elapsed: Duration, limit_s: f64, detail: String) -> Outcome {
    if elapsed.as_secs_f64() < limit_s {
        Ok(detail)
    } else {
        Err(format!("{detail}; took {:.2}s, limit {limit_s}s", elapsed.as_secs_f64()))
    }
}

fn proposition() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut worst: f64 = 0.0;
    for i in 1..=9 {
        let t = f64::from(i) / 10.0;
        let pairs = 100_000;
        let separated = (0..pairs)
            .filter(|_| {
                let (l1, l2): (f64, f64) = (rng.gen(), rng.gen());
                (l1 >= t) != (l2 >= t)
            })
            .count();
        let mc = separated as f64 / f64::from(pairs);
        let err = (mc - expected_distinction(t)).abs();
        if err > 0.01 {
            return Err(format!("t={t}: Monte Carlo {mc:.4} vs 2t(1-t) {:.4}", expected_distinction(t)));
        }
        worst = worst.max(err);
    }
    within(start.elapsed(), 2.0, format!("max |MC - 2t(1-t)| = {worst:.4}"))
}

fn entropy_formula() -> Outcome {
    for (p, h) in [(0.0, 0.0), (0.5, 1.0), (1.0, 0.0)] {
        let got = bernoulli_entropy(p).unwrap();
        if got != h {
            return Err(format!("H({p}) = {got}, expected exactly {h}"));
        }
    }
    let mut worst: f64 = 0.0;
    let grid = common::entropy_grid();
    if grid.len() != 1001 {
        return Err(format!("oracle grid has {} points", grid.len()));
    }
    for (p, h) in grid {
        worst = worst.max((bernoulli_entropy(p).unwrap() - h).abs());
    }
    if worst > 1e-9 {
        return Err(format!("max grid error {worst:e}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for v in 0..10_000 {
        let p: Vec<f64> = (0..20).map(|_| rng.gen()).collect();
        let order = |key: &dyn Fn(f64) -> f64| {
            let mut idx: Vec<usize> = (0..p.len()).collect();
            idx.sort_by(|&i, &j| key(p[j]).total_cmp(&key(p[i])).then(i.cmp(&j)));
            idx
        };
        if order(&|x| bernoulli_entropy(x).unwrap()) != order(&|x| x * (1.0 - x)) {
            return Err(format!("vector {v}: entropy and p(1-p) rankings differ"));
        }
    }
    Ok(format!("exact at 0, 0.5, 1; max grid error {worst:.1e}; 10^4 rankings agree"))
}

fn rank_fidelity() -> Outcome {
    let start = Instant::now();
    let bench = SimulatedBenchmark::generate(&Default::default(), 0);
    let cfg = FidelityConfig {
        strategies: vec![SubsetStrategy::Entropy, SubsetStrategy::Random],
        sizes: vec![50],
        n_models: 50,
        seeds: (0..20).collect(),
        calibration_k: 10,
    };
    let rows = rank_fidelity_curve(&bench, &cfg).map_err(|e| e.to_string())?;
    let means = aggregate_fidelity(&rows);
    let mean = |s| means.iter().find(|m| m.strategy == s).unwrap().mean_rho;
    let (ent, rnd) = (mean(SubsetStrategy::Entropy), mean(SubsetStrategy::Random));
    let detail = format!("mean rho entropy {ent:.4}, random {rnd:.4} (|S|=50, {} items)", bench.len());
    if ent < 0.95 || ent <= rnd {
        return Err(format!("{detail}; need entropy >= 0.95 and > random"));
    }
    within(start.elapsed(), 30.0, detail)
}

fn sorting_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut largest = 0;
    for case in 0..500 {
        let n = rng.gen_range(0..=200);
        largest = largest.max(n);
        let pts = common::random_points(&mut rng, n);
        if fast_nondominated_sort(&pts) != common::brute_force_fronts(&pts) {
            return Err(format!("population {case} (n={n}) disagrees with the pairwise oracle"));
        }
    }
    within(start.elapsed(), 10.0, format!("500 populations, n up to {largest}"))
}

fn bits(c: &Checkpoint) -> Vec<u32> {
    c.tensors().flat_map(|(_, t)| t.data().iter().map(|x| x.to_bits())).collect()
}

fn ulp_distance(a: f32, b: f32) -> u64 {
    if a == b {
        return 0;
    }
    let key = |x: f32| {
        let i = x.to_bits() as i32;
        i64::from(if i < 0 { i32::MIN - i } else { i })
    };
    key(a).abs_diff(key(b))
}

fn merge_identities() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    for (seed, params, tensors) in [(3, 1_000, 1), (4, 65_536, 4), (5, 1_000_000, 8)] {
        let (s2, s1) = common::checkpoint_pair(seed, params, tensors);
        let (b2, b1) = (bits(&s2), bits(&s1));
        let ep = MergeEndpoints::new(s2, s1).map_err(|e| e.to_string())?;
        let err = |e: paretomerge::MergeError| e.to_string();
        if bits(&merge_task_arithmetic(&ep, 0.0).map_err(err)?) != b2 {
            return Err(format!("{params} params: TA(0) differs from System-2"));
        }
        if bits(&merge_task_arithmetic(&ep, 1.0).map_err(err)?) != b1 {
            return Err(format!("{params} params: TA(1) differs from System-1"));
        }
        for lambda in [0.0, 0.3, 0.5, 0.77, 1.0] {
            let ta = bits(&merge_task_arithmetic(&ep, lambda).map_err(err)?);
            if bits(&merge_ties(&ep, lambda, 1.0).map_err(err)?) != ta {
                return Err(format!("{params} params: TIES(k=1) differs from TA at {lambda}"));
            }
        }
        let ta = merge_task_arithmetic(&ep, 0.5).map_err(err)?;
        let lin = merge_linear(&ep, 0.5, 0.5, LinearBounds::default()).map_err(err)?;
        let worst = ta
            .tensors()
            .zip(lin.tensors())
            .flat_map(|((_, x), (_, y))| x.data().iter().zip(y.data()).map(|(&a, &b)| ulp_distance(a, b)))
            .max()
            .unwrap_or(0);
        if worst > 1 {
            return Err(format!("{params} params: linear(0.5, 0.5) is {worst} ulp from TA(0.5)"));
        }
        checked = params;
    }
    within(start.elapsed(), 5.0, format!("endpoints byte-exact, TIES k=1 = TA, linear within 1 ulp, up to {checked} params"))
}

fn read_history(dir: &Path) -> Vec<HistoryEntry> {
    std::fs::read_to_string(dir.join("history.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn end_to_end() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let out = common::cli(tmp.path(), &["evolve", "--seed", "0", "--out", "run"]);
    let elapsed = start.elapsed();
    if !out.status.success() {
        return Err(format!("evolve failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    let run = tmp.path().join("run");
    let evaluated = read_history(&run).len();
    if evaluated > 220 {
        return Err(format!("{evaluated} candidates evaluated, budget 220"));
    }
    let front: ParetoFront = serde_json::from_str(&std::fs::read_to_string(run.join("pareto.json")).unwrap()).unwrap();
    let subset = EvaluationSubset::load(&run.join("subset.json")).map_err(|e| e.to_string())?;

    let bench = SimulatedBenchmark::generate(&Default::default(), 0);
    let reference = [0.0, bench.max_length()];
    let evaluator = SimulatedEvaluator::new(bench);
    let grid: Vec<HistoryEntry> = (0..=1000)
        .map(|i| {
            let c = Candidate::new(format!("grid-{i}"), Genotype::ta(f64::from(i) / 1000.0));
            let o = evaluator.objectives(&c, Some(&subset.item_ids)).unwrap();
            HistoryEntry::new(0, &c, o)
        })
        .collect();
    let brute = extract_pareto(&grid).unwrap();
    let (hv, hv_brute) = (front.hypervolume(reference), brute.hypervolume(reference));
    let ratio = hv / hv_brute;
    let detail = format!(
        "{evaluated} evaluations, {} front members, HV {hv:.2} vs grid {hv_brute:.2} ({:.2}%)",
        front.members.len(),
        100.0 * ratio
    );
    if ratio < 0.99 {
        return Err(detail);
    }
    within(elapsed, 60.0, detail)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let runs: [&[&str]; 4] = [
        &["evolve", "--seed", "0"],
        &["calibrate"],
        &["fidelity", "--sizes", "10,50", "--seeds", "3", "--seed", "7"],
        &["sample-subset", "--strategy", "random", "--size", "40", "--seed", "3"],
    ];
    let files: [&[&str]; 4] = [
        &["history.jsonl", "pareto.json", "front.csv", "subset.json"],
        &["calibration.json"],
        &["fidelity.csv", "fidelity_mean.csv"],
        &["subset.json"],
    ];
    let passes = [("a", "1"), ("b", "4"), ("c", "4")];
    for (out_dir, threads) in passes {
        for args in runs {
            let mut full: Vec<&str> = args.to_vec();
            full.extend(["--threads", threads, "--out", out_dir]);
            let o = common::cli(dir, &full);
            if !o.status.success() {
                return Err(format!("{full:?} failed: {}", String::from_utf8_lossy(&o.stderr)));
            }
        }
    }
    let mut compared = 0;
    for f in files.iter().flat_map(|f| f.iter()) {
        let read = |d: &str| std::fs::read(dir.join(d).join(f)).unwrap();
        let first = read("a");
        for (other, threads) in &passes[1..] {
            if read(other) != first {
                return Err(format!("{f} differs between 1 and {threads} threads"));
            }
        }
        compared += 1;
    }
    Ok(format!("{compared} output files byte-identical across 3 runs (1 and 4 threads)"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("proposition: E[D] = 2t(1-t)", proposition),
        ("entropy formula", entropy_formula),
        ("rank fidelity", rank_fidelity),
        ("non-dominated sorting oracle", sorting_oracle),
        ("merge identities", merge_identities),
        ("end-to-end search", end_to_end),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.2}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{secs:.2}s]");
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
