//! Result files. Every CSV starts with a `# schema: ...` comment line and
//! JSON documents carry a `schema_version` key.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

pub const SCHEMA_VERSION: &str = "msc-output/1";

pub const ESTIMATES_FILE: &str = "estimates.csv";
pub const EXCURSIONS_FILE: &str = "excursions.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";
pub const CONFIG_ECHO_FILE: &str = "config.toml";
pub const PLAN_FILE: &str = "plan.csv";
pub const COMPARE_FILE: &str = "compare.csv";

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// Write a CSV table with the schema comment line.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut buf = BufWriter::new(file);
    writeln!(buf, "# schema: {SCHEMA_VERSION}").map_err(|e| io_err(path, e))?;
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Read a CSV written by [`write_csv`], without its header.
pub fn read_csv(path: &Path) -> Result<Vec<Vec<String>>, CliError> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    r.records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()).map_err(|e| io_err(path, e)))
        .collect()
}

#[derive(Clone, Debug)]
pub struct EstimateRow {
    pub function: String,
    pub estimate: f64,
    pub stderr: f64,
}

pub fn write_estimates(dir: &Path, rows: &[EstimateRow]) -> Result<PathBuf, CliError> {
    let path = dir.join(ESTIMATES_FILE);
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.function.clone(), r.estimate.to_string(), r.stderr.to_string()])
        .collect();
    write_csv(&path, &["function", "estimate", "stderr"], &body)?;
    Ok(path)
}

pub fn read_estimates(path: &Path) -> Result<Vec<EstimateRow>, CliError> {
    read_csv(path)?
        .into_iter()
        .map(|r| {
            let num = |s: &str| s.parse::<f64>().map_err(|e| io_err(path, format!("{s:?}: {e}")));
            match r.as_slice() {
                [f, e, s] => Ok(EstimateRow {
                    function: f.clone(),
                    estimate: num(e)?,
                    stderr: num(s)?,
                }),
                _ => Err(io_err(path, "expected 3 columns")),
            }
        })
        .collect()
}

pub fn write_excursions(dir: &Path, taus: &[u64]) -> Result<(), CliError> {
    let body: Vec<Vec<String>> = taus.iter().enumerate().map(|(i, t)| vec![i.to_string(), t.to_string()]).collect();
    write_csv(&dir.join(EXCURSIONS_FILE), &["chain", "tau"], &body)
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut doc = serde_json::Map::new();
    doc.insert("schema_version".into(), SCHEMA_VERSION.into());
    if let serde_json::Value::Object(m) = value {
        doc.extend(m.clone());
    }
    let text = serde_json::to_string_pretty(&serde_json::Value::Object(doc)).map_err(|e| io_err(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

pub fn write_config_echo<T: Serialize>(dir: &Path, cfg: &T) -> Result<(), CliError> {
    let path = dir.join(CONFIG_ECHO_FILE);
    let text = toml::to_string(cfg).map_err(|e| io_err(&path, e))?;
    std::fs::write(&path, format!("# schema: {SCHEMA_VERSION}\n{text}")).map_err(|e| io_err(&path, e))
}
