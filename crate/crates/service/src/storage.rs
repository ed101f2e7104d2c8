//! Append-only JSONL event log and the compacted snapshot.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{EngineState, LogEntry};
use crate::error::EngineError;

pub const SNAPSHOT_FORMAT: &str = "morale-snapshot";

pub struct EventLog {
    path: PathBuf,
    writer: BufWriter<File>,
}

impl EventLog {
    pub fn open(path: &Path) -> Result<Self, EngineError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            writer: BufWriter::new(file),
        })
    }

    pub fn append(&mut self, entry: &LogEntry) -> Result<(), EngineError> {
        let line =
            serde_json::to_string(entry).map_err(|e| EngineError::Internal(e.to_string()))?;
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        Ok(())
    }

    pub fn sync(&mut self) -> Result<(), EngineError> {
        self.writer.flush()?;
        self.writer.get_ref().sync_data()?;
        Ok(())
    }

    /// Drops every entry; called once a snapshot covers them.
    pub fn truncate(&mut self) -> Result<(), EngineError> {
        self.writer.flush()?;
        let file = OpenOptions::new()
            .write(true)
            .truncate(true)
            .open(&self.path)?;
        file.sync_all()?;
        self.writer = BufWriter::new(OpenOptions::new().append(true).open(&self.path)?);
        Ok(())
    }
}

/// Reads a log. A torn final line (crash mid-append) is dropped; a bad line
/// anywhere else is corruption.
pub fn read_log(path: &Path) -> Result<Vec<LogEntry>, EngineError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let lines: Vec<String> = BufReader::new(File::open(path)?)
        .lines()
        .collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<LogEntry>(line) {
            Ok(e) => out.push(e),
            Err(e) if i + 1 == lines.len() => {
                log::warn!("{}: dropping torn final line: {e}", path.display());
            }
            Err(e) => {
                return Err(EngineError::Corrupt(format!(
                    "{} line {}: {e}",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub format: String,
    pub state: EngineState,
}

pub fn write_snapshot(path: &Path, state: &EngineState) -> Result<(), EngineError> {
    let snap = Snapshot {
        format: SNAPSHOT_FORMAT.into(),
        state: state.clone(),
    };
    let tmp = path.with_extension("tmp");
    {
        let mut f = BufWriter::new(File::create(&tmp)?);
        serde_json::to_writer(&mut f, &snap).map_err(|e| EngineError::Internal(e.to_string()))?;
        f.flush()?;
        f.get_ref().sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Option<EngineState>, EngineError> {
    if !path.exists() {
        return Ok(None);
    }
    let snap: Snapshot = serde_json::from_reader(BufReader::new(File::open(path)?))
        .map_err(|e| EngineError::Corrupt(format!("{}: {e}", path.display())))?;
    if snap.format != SNAPSHOT_FORMAT {
        return Err(EngineError::Corrupt(format!(
            "unknown snapshot format `{}`",
            snap.format
        )));
    }
    Ok(Some(snap.state))
}
