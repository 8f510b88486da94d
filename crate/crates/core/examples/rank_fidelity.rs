//! How faithfully does a small subset rank candidates compared with the full
//! benchmark? Prints mean Spearman rho per strategy and subset size.
//!
//! ```text
//! cargo run --release --example rank_fidelity
//! ```

use paretomerge::evaluation::SimulatedBenchmark;
use paretomerge::sampling::{aggregate_fidelity, rank_fidelity_curve, FidelityConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bench = SimulatedBenchmark::generate(&Default::default(), 0);
    let cfg = FidelityConfig::default();
    let rows = rank_fidelity_curve(&bench, &cfg)?;
    println!("{:<13} {}", "strategy", cfg.sizes.iter().map(|s| format!("{s:>7}")).collect::<String>());
    for strategy in &cfg.strategies {
        let line: String = aggregate_fidelity(&rows)
            .iter()
            .filter(|m| m.strategy == *strategy)
            .map(|m| format!("{:>7.3}", m.mean_rho))
            .collect();
        println!("{:<13} {line}", strategy.to_string());
    }
    Ok(())
}
