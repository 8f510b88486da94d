//! Per-benchmark accuracy and length tables with unweighted and size-weighted
//! averages and output-length reduction against a baseline model.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::Serialize;
use thiserror::Error;

use crate::evaluation::ItemOutcome;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("benchmark names differ between candidate and baseline: {0}")]
    NameMismatch(String),
    #[error("benchmark {0:?} has no outcomes")]
    EmptyGroup(String),
    #[error("no benchmarks given")]
    NoGroups,
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub name: String,
    pub item_count: usize,
    /// Fraction in `[0, 1]`.
    pub accuracy: f64,
    pub mean_length: f64,
    pub baseline_accuracy: f64,
    pub baseline_mean_length: f64,
    /// `100 * (1 - mean_length / baseline_mean_length)`; negative when longer.
    pub length_reduction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateReport {
    pub rows: Vec<BenchmarkRow>,
    /// Unweighted mean of per-benchmark accuracies.
    pub average: f64,
    /// Accuracy weighted by item count, equal to pooled accuracy.
    pub weighted_average: f64,
    /// Mean of per-benchmark length reductions.
    pub average_length_reduction: f64,
    /// Reduction of the pooled (item-weighted) mean length.
    pub weighted_length_reduction: f64,
}

pub fn length_reduction(length: f64, baseline: f64) -> f64 {
    100.0 * (1.0 - length / baseline)
}

fn summarize(name: &str, outs: &[ItemOutcome]) -> Result<(usize, f64, f64), ReportError> {
    if outs.is_empty() {
        return Err(ReportError::EmptyGroup(name.to_string()));
    }
    let n = outs.len();
    let acc = outs.iter().filter(|o| o.correct).count() as f64 / n as f64;
    let len = outs.iter().map(|o| o.length).sum::<f64>() / n as f64;
    Ok((n, acc, len))
}

pub fn build_report(
    groups: &BTreeMap<String, Vec<ItemOutcome>>,
    baseline: &BTreeMap<String, Vec<ItemOutcome>>,
) -> Result<AggregateReport, ReportError> {
    if groups.is_empty() {
        return Err(ReportError::NoGroups);
    }
    if !groups.keys().eq(baseline.keys()) {
        let only_cand: Vec<_> = groups.keys().filter(|k| !baseline.contains_key(*k)).collect();
        let only_base: Vec<_> = baseline.keys().filter(|k| !groups.contains_key(*k)).collect();
        return Err(ReportError::NameMismatch(format!(
            "candidate only {only_cand:?}, baseline only {only_base:?}"
        )));
    }
    let mut rows = Vec::with_capacity(groups.len());
    let (mut solved, mut items, mut len_sum) = (0.0, 0usize, 0.0);
    let (mut base_len_sum, mut base_items) = (0.0, 0usize);
    for (name, outs) in groups {
        let (n, acc, len) = summarize(name, outs)?;
        let (bn, bacc, blen) = summarize(name, &baseline[name])?;
        solved += acc * n as f64;
        items += n;
        len_sum += len * n as f64;
        base_len_sum += blen * bn as f64;
        base_items += bn;
        rows.push(BenchmarkRow {
            name: name.clone(),
            item_count: n,
            accuracy: acc,
            mean_length: len,
            baseline_accuracy: bacc,
            baseline_mean_length: blen,
            length_reduction: length_reduction(len, blen),
        });
    }
    let k = rows.len() as f64;
    Ok(AggregateReport {
        average: rows.iter().map(|r| r.accuracy).sum::<f64>() / k,
        weighted_average: solved / items as f64,
        average_length_reduction: rows.iter().map(|r| r.length_reduction).sum::<f64>() / k,
        weighted_length_reduction: length_reduction(len_sum / items as f64, base_len_sum / base_items as f64),
        rows,
    })
}

#[derive(Serialize)]
struct CsvRow<'a> {
    benchmark: &'a str,
    items: Option<usize>,
    accuracy_pct: f64,
    mean_length: Option<f64>,
    baseline_mean_length: Option<f64>,
    length_reduction_pct: f64,
}

impl AggregateReport {
    /// Per-benchmark rows followed by `AVG` and `W-AVG`.
    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let total: usize = self.rows.iter().map(|r| r.item_count).sum();
        let err = |e: csv::Error| ReportError::Csv(e.to_string());
        for r in &self.rows {
            w.serialize(CsvRow {
                benchmark: &r.name,
                items: Some(r.item_count),
                accuracy_pct: 100.0 * r.accuracy,
                mean_length: Some(r.mean_length),
                baseline_mean_length: Some(r.baseline_mean_length),
                length_reduction_pct: r.length_reduction,
            })
            .map_err(err)?;
        }
        w.serialize(CsvRow {
            benchmark: "AVG",
            items: None,
            accuracy_pct: 100.0 * self.average,
            mean_length: None,
            baseline_mean_length: None,
            length_reduction_pct: self.average_length_reduction,
        })
        .map_err(err)?;
        w.serialize(CsvRow {
            benchmark: "W-AVG",
            items: Some(total),
            accuracy_pct: 100.0 * self.weighted_average,
            mean_length: None,
            baseline_mean_length: None,
            length_reduction_pct: self.weighted_length_reduction,
        })
        .map_err(err)?;
        let bytes = w.into_inner().map_err(|e| ReportError::Csv(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

impl fmt::Display for AggregateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(9);
        let mut s = String::new();
        writeln!(s, "{:<width$}  {:>6}  {:>8}  {:>10}  {:>10}", "benchmark", "items", "acc %", "length", "reduction")?;
        for r in &self.rows {
            writeln!(
                s,
                "{:<width$}  {:>6}  {:>8.1}  {:>10.1}  {:>9.1}%",
                r.name,
                r.item_count,
                100.0 * r.accuracy,
                r.mean_length,
                r.length_reduction
            )?;
        }
        writeln!(s, "{:<width$}  {:>6}  {:>8.1}  {:>10}  {:>9.1}%", "AVG", "", 100.0 * self.average, "", self.average_length_reduction)?;
        write!(
            s,
            "{:<width$}  {:>6}  {:>8.1}  {:>10}  {:>9.1}%",
            "W-AVG",
            self.rows.iter().map(|r| r.item_count).sum::<usize>(),
            100.0 * self.weighted_average,
            "",
            self.weighted_length_reduction
        )?;
        f.write_str(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group(n: usize, solved: usize, length: f64) -> Vec<ItemOutcome> {
        (0..n)
            .map(|i| ItemOutcome {
                item_id: format!("q{i}"),
                correct: i < solved,
                length,
            })
            .collect()
    }

    fn one(name: &str, g: Vec<ItemOutcome>) -> BTreeMap<String, Vec<ItemOutcome>> {
        BTreeMap::from([(name.to_string(), g)])
    }

    #[test]
    fn halved_length() {
        let r = build_report(&one("gsm8k", group(10, 5, 500.0)), &one("gsm8k", group(10, 6, 1000.0))).unwrap();
        assert_eq!(r.rows[0].length_reduction, 50.0);
        assert_eq!(r.weighted_length_reduction, 50.0);
    }

    #[test]
    fn weighted_average_example() {
        let cand = BTreeMap::from([
            ("aime".to_string(), group(30, 12, 100.0)),
            ("gsm8k".to_string(), group(1319, 1055, 100.0)),
        ]);
        let r = build_report(&cand, &cand).unwrap();
        assert_eq!(r.rows[0].accuracy, 0.4);
        // (0.4 * 30 + 1055) / 1349
        assert!((r.weighted_average - 1067.0 / 1349.0).abs() < 1e-12);
        assert!((r.average - (0.4 + 1055.0 / 1319.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn longer_than_baseline_is_negative() {
        let r = build_report(&one("math", group(4, 2, 1242.0)), &one("math", group(4, 3, 1000.0))).unwrap();
        assert!((r.rows[0].length_reduction - (-24.2)).abs() < 1e-9);
        let csv = r.to_csv().unwrap();
        assert!(csv.starts_with("benchmark,items,accuracy_pct,mean_length,baseline_mean_length,length_reduction_pct\n"));
        assert!(csv.contains("W-AVG,4,50.0,,,"));
    }

    #[test]
    fn mismatched_names() {
        assert!(matches!(
            build_report(&one("a", group(1, 1, 1.0)), &one("b", group(1, 1, 1.0))),
            Err(ReportError::NameMismatch(_))
        ));
        assert!(matches!(
            build_report(&one("a", vec![]), &one("a", group(1, 1, 1.0))),
            Err(ReportError::EmptyGroup(_))
        ));
    }
}
