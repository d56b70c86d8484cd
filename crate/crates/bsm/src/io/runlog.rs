//! JSON-lines run log: one record per checkpoint of an online run.

use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One checkpoint of an online separation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLogRecord {
    /// Sample index at this checkpoint.
    pub t: u64,
    /// Windowed mean SIR in dB; absent when no reference is available.
    pub mean_sir_db: Option<f64>,
    /// Windowed per-output SIR in dB.
    pub sir_db: Option<Vec<f64>>,
    /// Gain diagonal.
    pub gains: Vec<f64>,
    /// Largest activation input magnitude at this sample.
    pub max_preactivation: f64,
    /// Per-neuron squared feedforward row norms.
    pub excitation: Vec<f64>,
    /// Per-neuron gain-weighted squared lateral row norms.
    pub inhibition: Vec<f64>,
    /// Dynamics iterations used at this sample.
    pub iterations: usize,
}

/// Appends one record as a JSON line, flushing before returning so records
/// survive a crash.
pub fn append_runlog(record: &RunLogRecord, path: &Path) -> Result<()> {
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    let line = serde_json::to_string(record)
        .map_err(|e| Error::Format(format!("run log serialization: {e}")))?;
    file.write_all(line.as_bytes())?;
    file.write_all(b"\n")?;
    file.flush()?;
    Ok(())
}

/// Reads every record of a run log; parse errors carry 1-based line numbers.
pub fn read_runlog(path: &Path) -> Result<Vec<RunLogRecord>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RunLogRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: format!("run log record: {e}"),
        })?;
        records.push(record);
    }
    Ok(records)
}
