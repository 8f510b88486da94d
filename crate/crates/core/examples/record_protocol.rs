//! Drive a search whose evaluations come from an external harness.
//!
//! Each pass either finishes or leaves `manifest.jsonl` listing candidates
//! that still need answers. Here the "harness" is the simulated benchmark,
//! writing per-item records the way an inference job would.
//!
//! ```text
//! cargo run --example record_protocol
//! ```

use std::io::Write;

use paretomerge::evaluation::{Evaluator, RecordLine, SimulatedBenchmark, SimulatedEvaluator};
use paretomerge::run::EvaluatorSource;
use paretomerge::{run_evolve, RunConfig, RunStatus};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("paretomerge-records-{}", std::process::id()));
    let records = dir.join("records.jsonl");
    let mut cfg = RunConfig::simulated(dir.join("run"));
    cfg.search.population_size = 8;
    cfg.search.generations = 4;
    cfg.evaluator = EvaluatorSource::Records {
        record_path: records.clone(),
    };
    std::fs::create_dir_all(&dir)?;

    let harness = SimulatedEvaluator::new(SimulatedBenchmark::generate(&Default::default(), 0));
    for pass in 1.. {
        match run_evolve(&cfg)? {
            RunStatus::Complete(r) => {
                println!("pass {pass}: done, {} front members", r.outcome.front.members.len());
                break;
            }
            RunStatus::Pending { manifest, candidates } => {
                println!("pass {pass}: {} candidates in {}", candidates.len(), manifest.display());
                let mut file = std::fs::OpenOptions::new().create(true).append(true).open(&records)?;
                for c in &candidates {
                    for o in harness.evaluate(c, None)? {
                        let line = RecordLine {
                            candidate_id: c.candidate_id.clone(),
                            item_id: o.item_id,
                            correct: u8::from(o.correct),
                            length: o.length,
                        };
                        writeln!(file, "{}", serde_json::to_string(&line)?)?;
                    }
                }
            }
        }
    }
    Ok(())
}
