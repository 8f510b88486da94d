mod common;

use std::io::Write;
use std::path::Path;

use paretomerge::evaluation::{Evaluator, RecordLine, SimulatedBenchmark, SimulatedEvaluator};
use paretomerge::moea::{extract_pareto, HistoryEntry, ParetoFront};
use paretomerge::run::{EvaluatorSource, SubsetSpec};
use paretomerge::{run_evolve, Candidate, Genotype, RunConfig, RunStatus};

/// Stand-in for the external harness: answers manifest candidates from the
/// simulated benchmark and appends their records.
fn answer_manifest(manifest: &Path, records: &Path, items: Option<&[String]>, skip: Option<(&str, &str)>) -> usize {
    let sim = SimulatedEvaluator::new(SimulatedBenchmark::generate(&Default::default(), 0));
    let mut file = std::fs::OpenOptions::new().create(true).append(true).open(records).unwrap();
    let text = std::fs::read_to_string(manifest).unwrap();
    let mut answered = 0;
    for line in text.lines() {
        let c: Candidate = serde_json::from_str(line).unwrap();
        for o in sim.evaluate(&c, items).unwrap() {
            if skip == Some((c.candidate_id.as_str(), o.item_id.as_str())) {
                continue;
            }
            let rec = RecordLine {
                candidate_id: c.candidate_id.clone(),
                item_id: o.item_id,
                correct: u8::from(o.correct),
                length: o.length,
            };
            writeln!(file, "{}", serde_json::to_string(&rec).unwrap()).unwrap();
        }
        answered += 1;
    }
    answered
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn two_phase_records_run_matches_simulated_run() {
    let tmp = tempfile::tempdir().unwrap();
    let mut sim_cfg = RunConfig::simulated(tmp.path().join("sim"));
    sim_cfg.search.population_size = 8;
    sim_cfg.search.generations = 3;
    let sim = run_evolve(&sim_cfg).unwrap().complete().unwrap();

    let records = tmp.path().join("records.jsonl");
    let mut cfg = sim_cfg.clone();
    cfg.output_dir = tmp.path().join("rec");
    cfg.evaluator = EvaluatorSource::Records {
        record_path: records.clone(),
    };
    let mut rounds = 0;
    let outcome = loop {
        match run_evolve(&cfg).unwrap() {
            RunStatus::Complete(r) => break r,
            RunStatus::Pending { manifest, candidates } => {
                // calibration pool first, then one manifest per generation
                let expected = if rounds == 0 { "calib-00".to_string() } else { format!("g{:03}-000", rounds - 1) };
                assert_eq!(candidates[0].candidate_id, expected);
                assert_eq!(answer_manifest(&manifest, &records, None, None), candidates.len());
                rounds += 1;
                assert!(rounds <= 5, "protocol does not converge");
            }
        }
    };
    assert_eq!(rounds, 5);
    assert!(!cfg.output_dir.join("manifest.jsonl").exists());
    assert_eq!(outcome.outcome.front, sim.outcome.front);
    assert_eq!(read(&cfg.output_dir.join("pareto.json")), read(&sim_cfg.output_dir.join("pareto.json")));
    assert_eq!(read(&cfg.output_dir.join("history.jsonl")), read(&sim_cfg.output_dir.join("history.jsonl")));
}

#[test]
fn missing_item_names_candidate_and_item() {
    let tmp = tempfile::tempdir().unwrap();
    let records = tmp.path().join("records.jsonl");
    let items: Vec<String> = vec!["item-0000".into(), "item-0001".into()];
    let config = serde_json::json!({
        "output_dir": "run",
        "search": {"population_size": 4, "generations": 1},
        "evaluator": {"records": {"record_path": records}},
        "subset": {"item_ids": items},
    });
    std::fs::write(tmp.path().join("cfg.json"), config.to_string()).unwrap();

    let first = common::cli(tmp.path(), &["evolve", "--config", "cfg.json"]);
    assert!(first.status.success(), "{first:?}");
    assert!(common::stdout(&first).contains("pending: 4 candidate(s)"));
    let manifest = tmp.path().join("run/manifest.jsonl");
    for line in read(&manifest).lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["genotype"]["kind"], "ta");
        assert!(v["candidate_id"].as_str().unwrap().starts_with("g000-"));
    }
    answer_manifest(&manifest, &records, Some(&items), Some(("g000-002", "item-0001")));

    let second = common::cli(tmp.path(), &["evolve", "--config", "cfg.json"]);
    assert_eq!(second.status.code(), Some(1));
    let err = String::from_utf8_lossy(&second.stderr);
    assert!(err.contains("g000-002") && err.contains("item-0001"), "{err}");
    // the generation's successful evaluations are kept
    let history = read(&tmp.path().join("run/history.jsonl"));
    assert_eq!(history.lines().count(), 3);
    assert!(!history.contains("g000-002"));
}

#[test]
fn full_subset_front_is_the_archive_front() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::simulated(tmp.path());
    cfg.subset = SubsetSpec::Full { full: true };
    let r = run_evolve(&cfg).unwrap().complete().unwrap();
    assert_eq!(r.subset.len(), 1000);
    assert_eq!(r.outcome.front, extract_pareto(&r.outcome.history).unwrap());

    // every member re-evaluates to its recorded objectives
    let sim = SimulatedEvaluator::new(SimulatedBenchmark::generate(&Default::default(), 0));
    for m in &r.outcome.front.members {
        let c = Candidate::new(m.candidate_id.clone(), m.genotype.clone());
        assert_eq!(sim.objectives(&c, None).unwrap(), m.objectives());
    }
    // no archived point is dominated by the dense grid brute force restricted to the archive's coefficients
    let grid: Vec<HistoryEntry> = (0..=1000)
        .map(|i| {
            let c = Candidate::new(format!("grid-{i}"), Genotype::ta(f64::from(i) / 1000.0));
            HistoryEntry::new(0, &c, sim.objectives(&c, None).unwrap())
        })
        .collect();
    let brute = extract_pareto(&grid).unwrap();
    let reference = [0.0, sim.bench.max_length()];
    let ratio = r.outcome.front.hypervolume(reference) / brute.hypervolume(reference);
    assert!(ratio > 0.95, "hypervolume ratio {ratio}");
}

#[test]
fn front_accuracy_falls_as_length_falls() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run_evolve(&RunConfig::simulated(tmp.path())).unwrap().complete().unwrap();
    let front: ParetoFront = serde_json::from_str(&read(&tmp.path().join("pareto.json"))).unwrap();
    assert_eq!(front, r.outcome.front);
    for w in front.members.windows(2) {
        assert!(w[0].accuracy >= w[1].accuracy);
        assert!(w[0].mean_length > w[1].mean_length);
    }
    let csv = read(&tmp.path().join("front.csv"));
    assert!(csv.starts_with("candidate_id,genotype,accuracy_pct,mean_length,length_reduction_pct\n"));
    assert_eq!(csv.lines().count(), front.members.len() + 1);
}

#[test]
fn history_is_persisted_every_generation() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::simulated(tmp.path());
    cfg.search.population_size = 6;
    cfg.search.generations = 2;
    run_evolve(&cfg).unwrap().complete().unwrap();
    let lines: Vec<HistoryEntry> = read(&tmp.path().join("history.jsonl"))
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 18);
    assert_eq!(lines[0].candidate_id, "g000-000");
    assert_eq!(lines[17].candidate_id, "g002-005");
    let config: RunConfig = serde_json::from_str(&read(&tmp.path().join("config.json"))).unwrap();
    assert_eq!(config.search.population_size, 6);
}
