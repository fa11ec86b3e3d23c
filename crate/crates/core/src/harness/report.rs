//! Per-seed metric files, the aggregate table and the markdown report.

use std::fmt::Write as _;

use super::metrics::{MetricSeries, RunMetrics};
use super::HarnessError;

/// Metric columns in report order: (csv name, markdown heading).
pub const COLUMNS: [(&str, &str); 6] = [
    ("accuracy", "Accuracy"),
    ("avg_window", "Avg window"),
    ("compute_cost_ms", "Proxy-cost (ms)"),
    ("drift_robustness", "Drift robustness"),
    ("stability", "Stability"),
    ("latency_ms", "Latency (ms)"),
];

const NA: &str = "NA";

fn values(m: &RunMetrics) -> [Option<f64>; 6] {
    [
        Some(m.accuracy),
        Some(m.avg_window),
        Some(m.compute_cost_ms),
        m.drift_robustness,
        Some(m.stability),
        Some(m.latency_ms),
    ]
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One (method, dataset) row of the aggregate table.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub method: String,
    pub dataset: String,
    pub seeds: usize,
    /// `(mean, std)` per entry of [`COLUMNS`]; `None` when not applicable.
    pub stats: [Option<(f64, f64)>; 6],
}

impl AggregateRow {
    /// Aggregates per-seed metrics. Seeds where a metric is not applicable
    /// are left out of that metric only.
    pub fn from_runs(method: &str, dataset: &str, runs: &[&RunMetrics]) -> Self {
        let mut stats = [None; 6];
        for (k, slot) in stats.iter_mut().enumerate() {
            let xs: Vec<f64> = runs.iter().filter_map(|m| values(m)[k]).collect();
            if !xs.is_empty() {
                *slot = Some(mean_std(&xs));
            }
        }
        Self {
            method: method.into(),
            dataset: dataset.into(),
            seeds: runs.len(),
            stats,
        }
    }

    pub fn mean(&self, column: &str) -> Option<f64> {
        let k = COLUMNS.iter().position(|(c, _)| *c == column)?;
        self.stats[k].map(|(m, _)| m)
    }

    pub fn std(&self, column: &str) -> Option<f64> {
        let k = COLUMNS.iter().position(|(c, _)| *c == column)?;
        self.stats[k].map(|(_, s)| s)
    }
}

fn fmt6(x: f64) -> String {
    let s = format!("{x:.6}");
    // keep "-0.000000" from appearing for tiny negatives
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Report(e.to_string())
}

/// `aggregate.csv` contents: header plus one row per entry, 6 decimals.
pub fn aggregate_csv(rows: &[AggregateRow]) -> Result<String, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::NothingToReport);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["method".to_string(), "dataset".into(), "seeds".into()];
    for (c, _) in COLUMNS {
        header.push(format!("{c}_mean"));
        header.push(format!("{c}_std"));
    }
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![r.method.clone(), r.dataset.clone(), r.seeds.to_string()];
        for s in &r.stats {
            match s {
                Some((m, sd)) => {
                    rec.push(fmt6(*m));
                    rec.push(fmt6(*sd));
                }
                None => {
                    rec.push(NA.into());
                    rec.push(NA.into());
                }
            }
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Report(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| HarnessError::Report(e.to_string()))
}

/// Inverse of [`aggregate_csv`].
pub fn parse_aggregate_csv(text: &str) -> Result<Vec<AggregateRow>, HarnessError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let expected = 3 + 2 * COLUMNS.len();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != expected {
            return Err(HarnessError::Report(format!("aggregate row {}: expected {expected} fields, found {}", i + 1, rec.len())));
        }
        let num = |j: usize| -> Result<Option<f64>, HarnessError> {
            let f = &rec[j];
            if f == NA {
                return Ok(None);
            }
            f.parse()
                .map(Some)
                .map_err(|_| HarnessError::Report(format!("aggregate row {}: bad number '{f}'", i + 1)))
        };
        let mut stats = [None; 6];
        for (k, slot) in stats.iter_mut().enumerate() {
            *slot = match (num(3 + 2 * k)?, num(4 + 2 * k)?) {
                (Some(m), Some(s)) => Some((m, s)),
                (None, None) => None,
                _ => return Err(HarnessError::Report(format!("aggregate row {}: half-missing statistic", i + 1))),
            };
        }
        rows.push(AggregateRow {
            method: rec[0].to_string(),
            dataset: rec[1].to_string(),
            seeds: rec[2]
                .parse()
                .map_err(|_| HarnessError::Report(format!("aggregate row {}: bad seed count", i + 1)))?,
            stats,
        });
    }
    Ok(rows)
}

/// Markdown comparison table, one row per (method, dataset).
pub fn markdown_report(title: &str, rows: &[AggregateRow]) -> Result<String, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::NothingToReport);
    }
    let mut out = String::new();
    let _ = writeln!(out, "# {title}\n");
    let _ = writeln!(
        out,
        "Prequential evaluation: every tick is predicted before it is learned; metrics cover post-warm-up ticks. \
         Values are mean ± sample std over seeds. Cost is the deterministic window-proportional proxy unless the run used measured timing.\n"
    );
    let _ = write!(out, "| Method | Dataset | Seeds |");
    for (_, h) in COLUMNS {
        let _ = write!(out, " {h} |");
    }
    let _ = write!(out, "\n|---|---|---:|");
    for _ in COLUMNS {
        let _ = write!(out, "---:|");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "| {} | {} | {} |", r.method, r.dataset, r.seeds);
        for s in &r.stats {
            match s {
                Some((m, sd)) => {
                    let _ = write!(out, " {} ± {} |", fmt6(*m), fmt6(*sd));
                }
                None => {
                    let _ = write!(out, " {NA} |");
                }
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// `metrics_<method>_<seed>.csv`: one row per evaluation interval, then an
/// `all` row. Full float precision so the log-derived recomputation matches.
pub fn per_seed_csv(series: &MetricSeries) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["interval_end".to_string(), "ticks".into()];
    header.extend(COLUMNS.iter().map(|(c, _)| c.to_string()));
    w.write_record(&header).map_err(csv_err)?;
    let rows = series
        .intervals
        .iter()
        .map(|(end, m)| (end.to_string(), m))
        .chain(std::iter::once(("all".to_string(), &series.overall)));
    for (label, m) in rows {
        let mut rec = vec![label, m.ticks.to_string()];
        rec.extend(values(m).iter().map(|v| v.map_or_else(|| NA.to_string(), |x| x.to_string())));
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Report(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| HarnessError::Report(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(acc: f64, robust: Option<f64>) -> RunMetrics {
        RunMetrics {
            ticks: 10,
            accuracy: acc,
            avg_window: 100.0,
            compute_cost_ms: 1.0,
            drift_robustness: robust,
            stability: 0.0,
            latency_ms: 1.0,
        }
    }

    #[test]
    fn sample_std_and_single_seed() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
        let a = metrics(0.5, Some(-0.1));
        let row = AggregateRow::from_runs("fixed", "s", &[&a]);
        assert!(row.stats.iter().all(|s| s.unwrap().1 == 0.0));
    }

    #[test]
    fn seed_order_does_not_matter() {
        let ms = [metrics(0.81, Some(0.1)), metrics(0.9, None), metrics(0.77, Some(-0.2))];
        let a = AggregateRow::from_runs("m", "d", &[&ms[0], &ms[1], &ms[2]]);
        let b = AggregateRow::from_runs("m", "d", &[&ms[2], &ms[0], &ms[1]]);
        assert_eq!(aggregate_csv(&[a.clone()]).unwrap(), aggregate_csv(&[b]).unwrap());
        assert_eq!(a.seeds, 3);
        assert!((a.mean("drift_robustness").unwrap() + 0.05).abs() < 1e-15);
    }

    #[test]
    fn two_methods_two_rows_and_na() {
        let a = metrics(0.8, None);
        let b = metrics(0.9, Some(0.01));
        let rows = vec![AggregateRow::from_runs("fixed", "s", &[&a]), AggregateRow::from_runs("adwin", "s", &[&b])];
        let md = markdown_report("t", &rows).unwrap();
        assert_eq!(md.lines().filter(|l| l.starts_with("| fixed") || l.starts_with("| adwin")).count(), 2);
        assert!(md.contains("| NA |"));
        let csv = aggregate_csv(&rows).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(1).unwrap().contains(",NA,NA,"));
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let ms = [metrics(0.123456789, Some(-0.0000001)), metrics(0.987654321, Some(0.25))];
        let rows = vec![AggregateRow::from_runs("rl-window", "synthetic", &[&ms[0], &ms[1]]), AggregateRow::from_runs("fixed", "synthetic", &[&ms[0]])];
        let first = aggregate_csv(&rows).unwrap();
        let again = aggregate_csv(&parse_aggregate_csv(&first).unwrap()).unwrap();
        assert_eq!(first, again);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(aggregate_csv(&[]), Err(HarnessError::NothingToReport)));
        let e = markdown_report("t", &[]).unwrap_err();
        assert_eq!(e.to_string(), "nothing to report");
    }
}
