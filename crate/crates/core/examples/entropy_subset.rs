//! Calibrate on the simulated benchmark, then compare the entropy, random
//! and disagreement subsets.
//!
//! ```text
//! cargo run --example entropy_subset
//! ```

use paretomerge::evaluation::{SimulatedBenchmark, SimulatedEvaluator};
use paretomerge::sampling::{build_calibration_matrix, default_grid, item_stats, select_subset, SubsetStrategy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bench = SimulatedBenchmark::generate(&Default::default(), 0);
    let matrix = build_calibration_matrix(&SimulatedEvaluator::new(bench.clone()), &default_grid(10)?)?;
    let stats = item_stats(&matrix);
    let entropy_of = |id: &str| stats.iter().find(|s| s.item_id == id).unwrap().entropy;

    for strategy in SubsetStrategy::ALL {
        match select_subset(&matrix, strategy, 50, 0) {
            Ok(subset) => {
                let mean_h = subset.item_ids.iter().map(|id| entropy_of(id)).sum::<f64>() / subset.len() as f64;
                let kinds = subset
                    .item_ids
                    .iter()
                    .map(|id| format!("{:?}", bench.items()[bench.position(id).unwrap()].response_kind))
                    .fold(std::collections::BTreeMap::<String, usize>::new(), |mut m, k| {
                        *m.entry(k).or_default() += 1;
                        m
                    });
                println!("{strategy:<13} mean H {mean_h:.3}  kinds {kinds:?}");
            }
            Err(e) => println!("{strategy:<13} {e}"),
        }
    }
    Ok(())
}
