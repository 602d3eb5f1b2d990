//! Append-only record of simulator runs, persisted as JSON lines so a
//! crashed orchestration loses at most the in-flight run.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Pilot,
    Design,
    Extra,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub x: Vec<f64>,
    pub value: f64,
    pub cost_seconds: f64,
    /// RFC 3339 timestamp of when the run finished.
    pub wall_time: String,
    pub stage: Stage,
    pub exit_status: i32,
}

/// Run history backed by a JSONL file. Appends go through a single
/// serialized writer and are flushed record by record.
pub struct RunLedger {
    path: PathBuf,
    records: Mutex<Vec<RunRecord>>,
    writer: Mutex<File>,
}

impl RunLedger {
    /// Open (or create) the ledger at `path`, loading any existing records.
    pub fn open(path: &Path) -> Result<Self> {
        let mut records = Vec::new();
        if path.exists() {
            let file = File::open(path)?;
            for (lineno, line) in BufReader::new(file).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: RunRecord = serde_json::from_str(&line).map_err(|e| {
                    Error::Ledger(format!(
                        "{}:{}: corrupt record: {e}",
                        path.display(),
                        lineno + 1
                    ))
                })?;
                records.push(record);
            }
        } else if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let writer = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(RunLedger {
            path: path.to_path_buf(),
            records: Mutex::new(records),
            writer: Mutex::new(writer),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.records.lock().expect("ledger lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn records(&self) -> Vec<RunRecord> {
        self.records.lock().expect("ledger lock").clone()
    }

    /// Earliest record at exactly this fidelity vector, if any.
    pub fn find(&self, x: &[f64]) -> Option<RunRecord> {
        self.records
            .lock()
            .expect("ledger lock")
            .iter()
            .find(|r| r.x == x)
            .cloned()
    }

    /// Append and flush one record.
    pub fn append(&self, record: RunRecord) -> Result<()> {
        let line = serde_json::to_string(&record)?;
        {
            let mut w = self.writer.lock().expect("ledger writer lock");
            writeln!(w, "{line}")?;
            w.flush()?;
            w.sync_data()?;
        }
        self.records.lock().expect("ledger lock").push(record);
        Ok(())
    }
}
