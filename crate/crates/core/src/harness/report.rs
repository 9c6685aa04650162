use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::{RawRow, RunResult};
use super::HarnessError;

/// Five-number summary with Tukey whiskers at 1.5·IQR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Smallest value at or above `q1 − 1.5·IQR`.
    pub whisker_low: f64,
    /// Largest value at or below `q3 + 1.5·IQR`.
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

/// Linearly interpolated quantile of sorted data (R type 7).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn boxplot(values: &[f64]) -> Option<BoxplotStats> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let (q1, median, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
    let iqr = q3 - q1;
    let (fence_lo, fence_hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = v.iter().copied().filter(|x| *x >= fence_lo && *x <= fence_hi).collect();
    Some(BoxplotStats {
        min: v[0],
        q1,
        median,
        q3,
        max: v[v.len() - 1],
        whisker_low: inside.first().copied().unwrap_or(q1),
        whisker_high: inside.last().copied().unwrap_or(q3),
        outliers: v.iter().copied().filter(|x| *x < fence_lo || *x > fence_hi).collect(),
    })
}

/// One (policy, metric) cell aggregated over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub policy: String,
    pub metric: String,
    pub mean: Option<f64>,
    /// Minimum over seeds.
    pub lower: Option<f64>,
    /// Maximum over seeds.
    pub upper: Option<f64>,
    pub n_ok: usize,
    pub n_failed: usize,
    pub boxplot: Option<BoxplotStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoTable {
    pub demo: String,
    pub cells: Vec<CellSummary>,
}

impl DemoTable {
    pub fn cell(&self, policy: &str, metric: &str) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.policy == policy && c.metric == metric)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub tables: Vec<DemoTable>,
}

impl AggregateReport {
    pub fn table(&self, demo: &str) -> Option<&DemoTable> {
        self.tables.iter().find(|t| t.demo == demo)
    }
}

fn summarize(policy: &str, metric: &str, rows: &[&RawRow]) -> CellSummary {
    let values: Vec<f64> = rows.iter().filter_map(|r| r.value).collect();
    let n_failed = rows.len() - values.len();
    let (mean, lower, upper) = if values.is_empty() {
        (None, None, None)
    } else {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = (values.iter().sum::<f64>() / values.len() as f64).clamp(lo, hi);
        (Some(mean), Some(lo), Some(hi))
    };
    CellSummary {
        policy: policy.to_string(),
        metric: metric.to_string(),
        mean,
        lower,
        upper,
        n_ok: values.len(),
        n_failed,
        boxplot: boxplot(&values),
    }
}

/// Aggregates raw rows; cells keep the order in which they first appear
/// once rows are sorted by seed.
pub fn aggregate_rows(rows: &[RawRow]) -> Result<AggregateReport, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::NoResults);
    }
    if rows.iter().all(|r| r.value.is_none()) {
        return Err(HarnessError::AllSeedsFailed);
    }
    let mut sorted: Vec<&RawRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.seed);
    let mut demos: Vec<&str> = Vec::new();
    let mut keys: Vec<(&str, &str, &str)> = Vec::new();
    for r in &sorted {
        if !demos.contains(&r.demo.as_str()) {
            demos.push(&r.demo);
        }
        let key = (r.demo.as_str(), r.policy.as_str(), r.metric.as_str());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let tables = demos
        .iter()
        .map(|&demo| DemoTable {
            demo: demo.to_string(),
            cells: keys
                .iter()
                .filter(|k| k.0 == demo)
                .map(|&(d, p, m)| {
                    let group: Vec<&RawRow> =
                        sorted.iter().copied().filter(|r| r.demo == d && r.policy == p && r.metric == m).collect();
                    summarize(p, m, &group)
                })
                .collect(),
        })
        .collect();
    Ok(AggregateReport { tables })
}

pub fn aggregate(results: &[RunResult]) -> Result<AggregateReport, HarnessError> {
    aggregate_rows(&flatten(results))
}

pub fn flatten(results: &[RunResult]) -> Vec<RawRow> {
    results.iter().flat_map(RunResult::rows).collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn table_csv(table: &DemoTable) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["policy", "metric", "mean", "lower", "upper", "n_ok", "n_failed"])?;
    for c in &table.cells {
        w.write_record([
            c.policy.clone(),
            c.metric.clone(),
            fmt_opt(c.mean),
            fmt_opt(c.lower),
            fmt_opt(c.upper),
            c.n_ok.to_string(),
            c.n_failed.to_string(),
        ])?;
    }
    finish_csv(w)
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String, HarnessError> {
    let bytes = w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn raw_csv(rows: &[RawRow]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["seed", "demo", "policy", "metric", "value", "n_effective", "error"])?;
    }
    finish_csv(w)
}

pub fn read_raw_csv(path: &Path) -> Result<Vec<RawRow>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

#[derive(Serialize)]
struct BoxplotEntry<'a> {
    demo: &'a str,
    policy: &'a str,
    metric: &'a str,
    stats: &'a BoxplotStats,
}

#[derive(Serialize)]
struct EstimateRecord<'a> {
    estimator: &'a str,
    policy: &'a str,
    demo: &'a str,
    seed: u64,
    mean: f64,
    n_effective: usize,
}

fn to_json<T: Serialize + ?Sized>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report values always serialize");
    s.push('\n');
    s
}

/// Renders every output file in memory.
pub fn render_report(report: &AggregateReport, rows: &[RawRow]) -> Result<Vec<(String, String)>, HarnessError> {
    let mut files = Vec::new();
    for t in &report.tables {
        files.push((format!("tables_{}.csv", t.demo), table_csv(t)?));
        files.push((format!("tables_{}.json", t.demo), to_json(t)));
    }
    let boxes: Vec<BoxplotEntry> = report
        .tables
        .iter()
        .flat_map(|t| {
            t.cells.iter().filter_map(move |c| {
                c.boxplot.as_ref().map(|stats| BoxplotEntry {
                    demo: &t.demo,
                    policy: &c.policy,
                    metric: &c.metric,
                    stats,
                })
            })
        })
        .collect();
    files.push(("boxplot.json".to_string(), to_json(&boxes)));
    files.push(("runs_raw.csv".to_string(), raw_csv(rows)?));
    let estimates: Vec<EstimateRecord> = rows
        .iter()
        .filter_map(|r| {
            Some(EstimateRecord {
                estimator: &r.metric,
                policy: &r.policy,
                demo: &r.demo,
                seed: r.seed,
                mean: r.value?,
                n_effective: r.n_effective?,
            })
        })
        .collect();
    files.push(("estimates.json".to_string(), to_json(&estimates)));
    Ok(files)
}

/// Writes the report into `out_dir`. Everything is rendered and staged
/// under temporary names first, so a failure leaves no partial summary.
pub fn emit_report(report: &AggregateReport, rows: &[RawRow], out_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let files = render_report(report, rows)?;
    fs::create_dir_all(out_dir)?;
    let mut staged = Vec::with_capacity(files.len());
    let result = (|| -> io::Result<()> {
        for (name, body) in &files {
            let tmp = out_dir.join(format!(".{name}.tmp"));
            fs::write(&tmp, body)?;
            staged.push((tmp, out_dir.join(name)));
        }
        Ok(())
    })();
    if let Err(e) = result {
        for (tmp, _) in &staged {
            let _ = fs::remove_file(tmp);
        }
        return Err(e.into());
    }
    let mut written = Vec::with_capacity(staged.len());
    for (tmp, dest) in staged {
        fs::rename(&tmp, &dest)?;
        written.push(dest);
    }
    Ok(written)
}
