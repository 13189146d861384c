//! Text renderings of a metrics table.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::streaming::ExecutorMode;

use super::{Dimension, MetricsRow, MetricsTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown format {other:?}; expected csv, json or markdown")),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Markdown => "markdown",
        })
    }
}

const CSV_HEADER: &str =
    "dimension,mode,latency_ticks,success_rate,mean_path_length,mean_completion_time,trials,seed_digest";

fn fixed(x: f64) -> String {
    format!("{x:.2}")
}

#[derive(Serialize)]
struct JsonRow<'a> {
    dimension: Dimension,
    mode: ExecutorMode,
    latency_ticks: u64,
    success_rate: serde_json::Value,
    mean_path_length: serde_json::Value,
    mean_completion_time: serde_json::Value,
    trials: usize,
    seed_digest: &'a str,
}

fn json_fixed(x: f64) -> serde_json::Value {
    serde_json::Value::Number(serde_json::Number::from_str(&fixed(x)).unwrap_or_else(|_| 0.into()))
}

pub fn render_report(table: &MetricsTable, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => {
            let mut out = String::from(CSV_HEADER);
            out.push('\n');
            for r in &table.rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    r.dimension,
                    r.mode,
                    r.latency_ticks,
                    fixed(r.success_rate),
                    fixed(r.mean_path_length),
                    fixed(r.mean_completion_time),
                    r.trials,
                    r.seed_digest
                ));
            }
            out
        }
        ReportFormat::Json => {
            let rows: Vec<JsonRow> = table
                .rows
                .iter()
                .map(|r| JsonRow {
                    dimension: r.dimension,
                    mode: r.mode,
                    latency_ticks: r.latency_ticks,
                    success_rate: json_fixed(r.success_rate),
                    mean_path_length: json_fixed(r.mean_path_length),
                    mean_completion_time: json_fixed(r.mean_completion_time),
                    trials: r.trials,
                    seed_digest: &r.seed_digest,
                })
                .collect();
            let mut s = serde_json::to_string_pretty(&rows).expect("rows serialize");
            s.push('\n');
            s
        }
        ReportFormat::Markdown => markdown(table),
    }
}

/// Modes as rows, dimensions as columns; cells are success rates.
fn markdown(table: &MetricsTable) -> String {
    let mut dims: Vec<Dimension> = table.rows.iter().map(|r| r.dimension).collect();
    dims.sort();
    dims.dedup();
    let mut keys: Vec<(ExecutorMode, u64)> = table.rows.iter().map(|r| (r.mode, r.latency_ticks)).collect();
    keys.sort();
    keys.dedup();

    let mut out = String::from("| Mode | m |");
    for d in &dims {
        out.push_str(&format!(" {d} |"));
    }
    out.push_str(" Path Len | Time |\n|---|---|");
    for _ in &dims {
        out.push_str("---|");
    }
    out.push_str("---|---|\n");
    for (mode, m) in keys {
        let rows: Vec<&MetricsRow> = table
            .rows
            .iter()
            .filter(|r| r.mode == mode && r.latency_ticks == m)
            .collect();
        out.push_str(&format!("| {} | {m} |", mode.label()));
        for d in &dims {
            match rows.iter().find(|r| r.dimension == *d) {
                Some(r) => out.push_str(&format!(" {} |", fixed(r.success_rate))),
                None => out.push_str(" - |"),
            }
        }
        let n: usize = rows.iter().map(|r| r.trials).sum();
        let weighted = |f: fn(&MetricsRow) -> f64| {
            if n == 0 {
                0.0
            } else {
                rows.iter().map(|r| f(r) * r.trials as f64).sum::<f64>() / n as f64
            }
        };
        out.push_str(&format!(
            " {} | {} |\n",
            fixed(weighted(|r| r.mean_path_length)),
            fixed(weighted(|r| r.mean_completion_time))
        ));
    }
    out
}

/// Parse the CSV rendering back into a table (values at report precision).
pub fn parse_csv(text: &str) -> Result<MetricsTable, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(format!("unexpected header {other:?}")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(format!("row {}: expected 8 fields, got {}", i + 1, f.len()));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| format!("row {}: {e}", i + 1));
        rows.push(MetricsRow {
            dimension: f[0].parse()?,
            mode: f[1].parse()?,
            latency_ticks: f[2].parse().map_err(|e| format!("row {}: {e}", i + 1))?,
            success_rate: num(f[3])?,
            mean_path_length: num(f[4])?,
            mean_completion_time: num(f[5])?,
            trials: f[6].parse().map_err(|e| format!("row {}: {e}", i + 1))?,
            seed_digest: f[7].to_string(),
        });
    }
    Ok(MetricsTable { rows })
}
