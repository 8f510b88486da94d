//! Search TA coefficients with NSGA-II on the simulated benchmark and print
//! the accuracy/length front next to a dense grid sweep.
//!
//! ```text
//! cargo run --example evolve_front [output-dir]
//! ```

use paretomerge::evaluation::{Evaluator, SimulatedBenchmark, SimulatedEvaluator};
use paretomerge::moea::{extract_pareto, HistoryEntry};
use paretomerge::{run_evolve, Candidate, Genotype, RunConfig, RunStatus};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "target/evolve_front".into());
    let cfg = RunConfig::simulated(&out);
    let RunStatus::Complete(result) = run_evolve(&cfg)? else {
        unreachable!("simulated runs never wait for records")
    };

    println!("evolved front ({} evaluations):", result.outcome.history.len());
    for m in &result.outcome.front.members {
        println!("  {:<10} {:<16} acc {:5.1}%  len {:7.1}", m.candidate_id, m.genotype.to_string(), 100.0 * m.accuracy, m.mean_length);
    }

    let bench = SimulatedBenchmark::generate(&Default::default(), 0);
    let reference = [0.0, bench.max_length()];
    let sim = SimulatedEvaluator::new(bench);
    let grid: Vec<HistoryEntry> = (0..=100)
        .map(|i| {
            let c = Candidate::new(format!("grid-{i}"), Genotype::ta(f64::from(i) / 100.0));
            HistoryEntry::new(0, &c, sim.objectives(&c, Some(&result.subset)).unwrap())
        })
        .collect();
    let sweep = extract_pareto(&grid)?;
    println!(
        "hypervolume: evolved {:.1}, 101-point sweep {:.1}",
        result.outcome.front.hypervolume(reference),
        sweep.hypervolume(reference)
    );
    println!("run directory: {out}");
    Ok(())
}
