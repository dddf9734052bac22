use std::fs;
use std::path::{Path, PathBuf};

use hetsign_core::{Error, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;

/// A rectangular table of pre-formatted cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let to_err = |e: csv::Error| Error::Validation(format!("csv: {e}"));
        w.write_record(&self.header).map_err(to_err)?;
        for row in &self.rows {
            w.write_record(row).map_err(to_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Validation(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("cells are UTF-8"))
    }
}

/// Formats a float in shortest round-trip form.
pub fn num(v: f64) -> String {
    format!("{v}")
}

/// Mean and sample standard deviation; the deviation is `None` below two samples.
pub fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), num)
}

/// Everything needed to re-run a command bit-identically.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance<'a> {
    pub command: &'a str,
    pub version: &'static str,
    pub config: &'a ExperimentConfig,
    pub repetition_seeds: Vec<u64>,
    pub wall_time_secs: f64,
    pub passed: bool,
}

/// Output of one command before it is written to disk.
#[derive(Debug, Clone, Default)]
pub struct CommandOutput {
    pub report: Table,
    /// Additional named CSV files such as per-run tables.
    pub extra: Vec<(String, Table)>,
    pub svgs: Vec<(String, String)>,
    pub passed: bool,
    /// Human-readable lines printed after the run.
    pub summary: Vec<String>,
    pub repetition_seeds: Vec<u64>,
}

fn write(path: PathBuf, body: &str) -> Result<()> {
    fs::write(&path, body).map_err(|e| Error::Io { path, source: e })
}

/// Writes `report.csv`, extra tables, SVGs and `provenance.json` under `<out>/<command>/`.
pub fn write_outputs(
    out: &Path,
    command: &str,
    cfg: &ExperimentConfig,
    output: &CommandOutput,
    wall_time_secs: f64,
) -> Result<PathBuf> {
    let dir = out.join(command);
    fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
    write(dir.join("report.csv"), &output.report.to_csv()?)?;
    for (name, table) in &output.extra {
        write(dir.join(format!("{name}.csv")), &table.to_csv()?)?;
    }
    if cfg.svg {
        for (name, svg) in &output.svgs {
            write(dir.join(format!("{name}.svg")), svg)?;
        }
    }
    let provenance = Provenance {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        repetition_seeds: output.repetition_seeds.clone(),
        wall_time_secs,
        passed: output.passed,
    };
    write(dir.join("provenance.json"), &(serde_json::to_string_pretty(&provenance)? + "\n"))?;
    Ok(dir)
}
