//! Per-benchmark accuracy and length reduction against a baseline, as text
//! and CSV.
//!
//! ```text
//! cargo run --example aggregate_report
//! ```

use std::collections::BTreeMap;

use paretomerge::evaluation::ItemOutcome;
use paretomerge::report::build_report;

fn group(n: usize, solved: usize, length: f64) -> Vec<ItemOutcome> {
    (0..n)
        .map(|i| ItemOutcome {
            item_id: format!("q{i}"),
            correct: i < solved,
            length: length * (0.8 + 0.4 * (i % 5) as f64 / 4.0),
        })
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let candidate = BTreeMap::from([
        ("aime24".to_string(), group(30, 9, 5200.0)),
        ("gsm8k".to_string(), group(1319, 1120, 420.0)),
        ("math500".to_string(), group(500, 380, 1900.0)),
    ]);
    let baseline = BTreeMap::from([
        ("aime24".to_string(), group(30, 10, 9800.0)),
        ("gsm8k".to_string(), group(1319, 1080, 1300.0)),
        ("math500".to_string(), group(500, 400, 3800.0)),
    ]);
    let report = build_report(&candidate, &baseline)?;
    println!("{report}\n");
    print!("{}", report.to_csv()?);
    Ok(())
}
