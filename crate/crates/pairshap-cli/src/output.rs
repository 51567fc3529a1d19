//! Deterministic artifact writing: JSON with sorted keys, atomic file
//! replacement (temp + rename), and the resolved run-config echo every
//! command drops next to its outputs.

use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::errors::{CliError, CliResult};

pub fn ensure_out_dir(out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out.display())))
}

/// Write via a temp file in the same directory, then rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp: PathBuf = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|s| s.to_string_lossy()).unwrap_or_default()
    ));
    std::fs::write(&tmp, bytes)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| CliError::Runtime(format!("cannot rename into {}: {e}", path.display())))
}

pub fn write_json(path: &Path, value: &Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Runtime(format!("serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Serialize rows of string fields as a CSV file.
pub fn write_csv_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut writer = csv_writer();
    writer
        .write_record(header)
        .map_err(|e| CliError::Runtime(format!("csv header: {e}")))?;
    for row in rows {
        writer
            .write_record(row)
            .map_err(|e| CliError::Runtime(format!("csv row: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::Runtime(format!("csv flush: {e}")))?;
    write_atomic(path, &bytes)
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().from_writer(Vec::new())
}

/// Shortest-round-trip float formatting shared by all CSV artifacts.
pub fn fmt(v: f64) -> String {
    format!("{v}")
}

pub fn write_run_config(out: &Path, config: &Value) -> CliResult<()> {
    write_json(&out.join("run_config.json"), config)
}
