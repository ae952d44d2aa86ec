//! Metrics rows and their CSV/JSON serialization.
//!
//! Floats are written with 17 significant digits so a round trip through
//! text reproduces the exact bit pattern; rows are sorted by
//! (scenario, variant, trial, global_iter) so equal runs produce
//! byte-identical files.

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub const CSV_HEADER: &str =
    "scenario,trial,method,variant,global_iter,cumulative_updates,relative_error,client_gap,cluster_gap";

/// One emitted metrics row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub scenario: String,
    pub trial: u64,
    pub method: String,
    pub variant: String,
    pub global_iter: u64,
    pub cumulative_updates: u64,
    pub relative_error: f64,
    pub client_gap: f64,
    pub cluster_gap: f64,
}

/// 17 significant digits: enough to reconstruct any f64 exactly.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn record_key(r: &MetricsRecord) -> (&str, &str, u64, u64, &str) {
    (&r.scenario, &r.variant, r.trial, r.global_iter, &r.method)
}

pub fn sort_records(records: &mut [MetricsRecord]) {
    records.sort_by(|a, b| {
        record_key(a)
            .partial_cmp(&record_key(b))
            .unwrap_or(Ordering::Equal)
    });
}

pub fn write_csv<W: Write>(records: &[MetricsRecord], out: &mut W) -> Result<(), Error> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.scenario,
            r.trial,
            r.method,
            r.variant,
            r.global_iter,
            r.cumulative_updates,
            format_float(r.relative_error),
            format_float(r.client_gap),
            format_float(r.cluster_gap),
        )?;
    }
    Ok(())
}

pub fn csv_string(records: &[MetricsRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(records, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv is ascii")
}

pub fn write_csv_file(records: &[MetricsRecord], path: &Path) -> Result<(), Error> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_csv(records, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_json_file(records: &[MetricsRecord], path: &Path) -> Result<(), Error> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer(std::io::BufWriter::new(file), records)
        .map_err(|e| Error::Serialization(e.to_string()))
}

/// Strict inverse of `write_csv`: exact header, exact column count.
pub fn parse_csv(text: &str) -> Result<Vec<MetricsRecord>, Error> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(Error::Serialization(format!("bad csv header: {other:?}"))),
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 9 {
            return Err(Error::Serialization(format!(
                "row {}: expected 9 columns, got {}",
                i + 2,
                cols.len()
            )));
        }
        let bad = |what: &str| Error::Serialization(format!("row {}: bad {what}", i + 2));
        records.push(MetricsRecord {
            scenario: cols[0].to_string(),
            trial: cols[1].parse().map_err(|_| bad("trial"))?,
            method: cols[2].to_string(),
            variant: cols[3].to_string(),
            global_iter: cols[4].parse().map_err(|_| bad("global_iter"))?,
            cumulative_updates: cols[5].parse().map_err(|_| bad("cumulative_updates"))?,
            relative_error: cols[6].parse().map_err(|_| bad("relative_error"))?,
            client_gap: cols[7].parse().map_err(|_| bad("client_gap"))?,
            cluster_gap: cols[8].parse().map_err(|_| bad("cluster_gap"))?,
        });
    }
    Ok(records)
}

/// Cross-trial aggregate of one (scenario, variant, global_iter) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub scenario: String,
    pub variant: String,
    pub global_iter: u64,
    pub trials: usize,
    pub mean_cumulative_updates: f64,
    pub mean_relative_error: f64,
    pub median_relative_error: f64,
    pub mean_client_gap: f64,
    pub mean_cluster_gap: f64,
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Collapses sorted records across trials.
pub fn aggregate(records: &[MetricsRecord]) -> Vec<SummaryRecord> {
    use std::collections::BTreeMap;
    let mut cells: BTreeMap<(String, String, u64), Vec<&MetricsRecord>> = BTreeMap::new();
    for r in records {
        cells
            .entry((r.scenario.clone(), r.variant.clone(), r.global_iter))
            .or_default()
            .push(r);
    }
    cells
        .into_iter()
        .map(|((scenario, variant, global_iter), rs)| {
            let n = rs.len() as f64;
            let mut errs: Vec<f64> = rs.iter().map(|r| r.relative_error).collect();
            SummaryRecord {
                scenario,
                variant,
                global_iter,
                trials: rs.len(),
                mean_cumulative_updates: rs
                    .iter()
                    .map(|r| r.cumulative_updates as f64)
                    .sum::<f64>()
                    / n,
                mean_relative_error: rs.iter().map(|r| r.relative_error).sum::<f64>() / n,
                median_relative_error: median(&mut errs),
                mean_client_gap: rs.iter().map(|r| r.client_gap).sum::<f64>() / n,
                mean_cluster_gap: rs.iter().map(|r| r.cluster_gap).sum::<f64>() / n,
            }
        })
        .collect()
}

pub fn write_summary_csv(summaries: &[SummaryRecord], path: &Path) -> Result<(), Error> {
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(
        out,
        "scenario,variant,global_iter,trials,mean_cumulative_updates,mean_relative_error,median_relative_error,mean_client_gap,mean_cluster_gap"
    )?;
    for s in summaries {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            s.scenario,
            s.variant,
            s.global_iter,
            s.trials,
            format_float(s.mean_cumulative_updates),
            format_float(s.mean_relative_error),
            format_float(s.median_relative_error),
            format_float(s.mean_client_gap),
            format_float(s.mean_cluster_gap),
        )?;
    }
    out.flush()?;
    Ok(())
}
