//! CSV and JSON writers.
//!
//! CSV: `#` comment lines carrying the tool name, the master seed and the
//! resolved config as TOML, then a header row, then data rows. Floats are
//! written as `{:.16e}` (17 significant digits), rows end in `\n`, missing
//! values are empty fields.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{FileConfig, RunConfig};
use crate::error::{CliError, CliResult};

/// Schema tag carried by every JSON report.
pub const JSON_SCHEMA: &str = "spin-collapse/report/v1";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
    Missing,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Float)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

impl Cell {
    fn write(&self, out: &mut String) {
        match self {
            Cell::Float(v) => out.push_str(&format_float(*v)),
            Cell::Int(v) => {
                let _ = write!(out, "{v}");
            }
            Cell::Text(s) => out.push_str(s),
            Cell::Missing => {}
        }
    }
}

/// The comment block that opens every CSV file.
pub fn csv_preamble(title: &str, config: &RunConfig) -> String {
    let mut out = format!("# spin-collapse {title}\n# master_seed = {}\n# config:\n", config.ensemble.master_seed);
    for line in config.to_toml().lines() {
        if line.is_empty() {
            out.push_str("#\n");
        } else {
            let _ = writeln!(out, "# {line}");
        }
    }
    out
}

pub fn render_csv(title: &str, config: &RunConfig, columns: &[&str], rows: impl IntoIterator<Item = Vec<Cell>>) -> String {
    let mut out = csv_preamble(title, config);
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        for (k, cell) in row.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            cell.write(&mut out);
        }
        out.push('\n');
    }
    out
}

/// Strips the comment preamble from a CSV file and returns the embedded config text.
pub fn embedded_config(csv: &str) -> String {
    csv.lines()
        .take_while(|l| l.starts_with('#'))
        .skip_while(|l| *l != "# config:")
        .skip(1)
        .map(|l| l.strip_prefix("# ").or_else(|| l.strip_prefix('#')).unwrap_or(l))
        .fold(String::new(), |mut acc, l| {
            acc.push_str(l);
            acc.push('\n');
            acc
        })
}

#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub schema: &'static str,
    pub experiment: &'static str,
    pub master_seed: u64,
    pub config: FileConfig,
    #[serde(flatten)]
    pub body: &'a T,
}

pub fn render_json<T: Serialize>(config: &RunConfig, body: &T) -> String {
    let envelope = Envelope {
        schema: JSON_SCHEMA,
        experiment: config.experiment.as_str(),
        master_seed: config.ensemble.master_seed,
        config: config.to_file_config(),
        body,
    };
    let mut text = serde_json::to_string_pretty(&envelope).expect("report bodies always serialize");
    text.push('\n');
    text
}

/// Collects output files under one directory.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn into_written(self) -> Vec<PathBuf> {
        self.written
    }
}
