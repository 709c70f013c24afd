//! Loading measurement records into an analysable dataset.
//!
//! Input files are JSONL in either of two shapes: bare records (agent
//! spools) or the server's tagged log, where records appear as
//! `{"entry":"record","record":{...}}` among status and instruction
//! entries. Directories are expanded to the `*.jsonl` files they contain.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use amigo_core::{MeasurementRecord, NetworkInfo, NetworkRegistry};
use serde_json::Value;

use crate::error::{AnalysisError, Result};

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub records: Vec<MeasurementRecord>,
    pub registry: NetworkRegistry,
    /// Records whose network is absent from the registry.
    pub quarantined: Vec<MeasurementRecord>,
    /// Repeated record ids seen after the first copy.
    pub duplicates_dropped: usize,
}

impl Dataset {
    /// Deduplicates by record id (first copy wins) and quarantines records
    /// with unregistered networks.
    pub fn new(records: impl IntoIterator<Item = MeasurementRecord>, registry: NetworkRegistry) -> Self {
        let mut seen = BTreeSet::new();
        let mut ds = Dataset {
            registry,
            ..Dataset::default()
        };
        for r in records {
            if !seen.insert(r.record_id.as_str().to_string()) {
                ds.duplicates_dropped += 1;
                continue;
            }
            if ds.registry.get(&r.network_id).is_some() {
                ds.records.push(r);
            } else {
                ds.quarantined.push(r);
            }
        }
        ds
    }

    pub fn load(inputs: &[PathBuf], registry: &Path) -> Result<Self> {
        let registry = NetworkRegistry::load(registry)?;
        let mut records = Vec::new();
        for file in expand_inputs(inputs)? {
            records.extend(read_records(&file)?);
        }
        Ok(Dataset::new(records, registry))
    }

    /// Registry entry for a record in `records`.
    pub fn network(&self, record: &MeasurementRecord) -> &NetworkInfo {
        self.registry
            .get(&record.network_id)
            .expect("dataset records are registry-resolved")
    }
}

fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found = Vec::new();
            let entries = std::fs::read_dir(input).map_err(|e| AnalysisError::io(input, e))?;
            for entry in entries {
                let path = entry.map_err(|e| AnalysisError::io(input, e))?.path();
                if path.extension().is_some_and(|e| e == "jsonl") {
                    found.push(path);
                }
            }
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    Ok(files)
}

/// Reads one JSONL file. Non-record server log entries are skipped and a
/// final line without its newline (a torn append) is ignored.
pub fn read_records(path: &Path) -> Result<Vec<MeasurementRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| AnalysisError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.split_inclusive('\n').enumerate() {
        if !line.ends_with('\n') {
            break;
        }
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| AnalysisError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let value: Value = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        let record_value = match value.get("entry").and_then(Value::as_str) {
            Some("record") => match value.get("record") {
                Some(r) => r.clone(),
                None => return Err(parse_err("record entry without a record".into())),
            },
            Some(_) => continue,
            None => value,
        };
        let record: MeasurementRecord =
            serde_json::from_value(record_value).map_err(|e| parse_err(e.to_string()))?;
        record.validate().map_err(|e| parse_err(e.to_string()))?;
        out.push(record);
    }
    Ok(out)
}
