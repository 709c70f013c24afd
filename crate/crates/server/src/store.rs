//! Append-only log plus the in-memory index rebuilt from it.

use std::collections::{BTreeMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use amigo_core::{
    AckOutcome, Clock, Connectivity, DeviceStatus, ExperimentKind, Instruction, InstructionState,
    MeasurementRecord, NewInstruction, RecordId,
};
use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const LOG_FILE: &str = "store.jsonl";

/// A device is stale after three missed 5-minute reports.
pub fn stale_after() -> Duration {
    Duration::minutes(15)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "entry", rename_all = "snake_case")]
pub enum LogEntry {
    Status {
        received_at: DateTime<Utc>,
        status: DeviceStatus,
    },
    InstructionCreated {
        instruction: Instruction,
    },
    InstructionDelivered {
        id: String,
        at: DateTime<Utc>,
    },
    InstructionResolved {
        id: String,
        outcome: AckOutcome,
        detail: String,
        at: DateTime<Utc>,
    },
    Record {
        received_at: DateTime<Utc>,
        record: MeasurementRecord,
    },
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },
    #[error("{what} {id:?} not found")]
    NotFound { what: &'static str, id: String },
    #[error("instruction {id:?} is {state:?}; only delivered instructions can be resolved")]
    State { id: String, state: InstructionState },
    #[error("instruction id {0:?} already exists")]
    Conflict(String),
    #[error("store log: {0}")]
    Io(#[from] std::io::Error),
    #[error("store log line {line} is corrupt: {message}")]
    Corrupt { line: usize, message: String },
}

impl From<amigo_core::ValidationError> for StoreError {
    fn from(e: amigo_core::ValidationError) -> Self {
        StoreError::Validation {
            field: e.field,
            reason: e.reason,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSummary {
    pub device_id: String,
    pub last_seen: DateTime<Utc>,
    pub battery_pct: Option<u8>,
    pub connectivity: Connectivity,
    pub operator_name: String,
    pub network_id: String,
    pub data_used_today: u64,
    pub pending_instructions: usize,
    pub stale: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejected {
    /// Empty when the record was too malformed to carry an id.
    pub record_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SubmitOutcome {
    pub accepted: usize,
    pub rejected: Vec<Rejected>,
}

#[derive(Debug, Clone, PartialEq)]
struct DeviceEntry {
    last_status: DeviceStatus,
    last_seen: DateTime<Utc>,
}

/// The in-memory index. Only [`Index::apply`] mutates it, for live
/// operations and replay alike.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Index {
    devices: BTreeMap<String, DeviceEntry>,
    instructions: BTreeMap<String, Instruction>,
    /// Instruction ids per device in creation order.
    queues: BTreeMap<String, Vec<String>>,
    records: Vec<MeasurementRecord>,
    record_ids: HashSet<RecordId>,
}

impl Index {
    pub fn apply(&mut self, entry: &LogEntry) {
        match entry {
            LogEntry::Status { received_at, status } => {
                self.devices.insert(
                    status.device_id.clone(),
                    DeviceEntry {
                        last_status: status.clone(),
                        last_seen: *received_at,
                    },
                );
            }
            LogEntry::InstructionCreated { instruction } => {
                self.queues
                    .entry(instruction.device_id.clone())
                    .or_default()
                    .push(instruction.id.clone());
                self.instructions.insert(instruction.id.clone(), instruction.clone());
            }
            LogEntry::InstructionDelivered { id, .. } => {
                if let Some(i) = self.instructions.get_mut(id) {
                    if i.state == InstructionState::Pending {
                        i.state = InstructionState::Delivered;
                    }
                }
            }
            LogEntry::InstructionResolved { id, outcome, detail, .. } => {
                if let Some(i) = self.instructions.get_mut(id) {
                    if i.state == InstructionState::Delivered {
                        i.state = (*outcome).into();
                        i.outcome = Some(detail.clone());
                    }
                }
            }
            LogEntry::Record { record, .. } => {
                if self.record_ids.insert(record.record_id.clone()) {
                    self.records.push(record.clone());
                }
            }
        }
    }

    fn pending_for(&self, device_id: &str) -> impl Iterator<Item = &Instruction> {
        self.queues
            .get(device_id)
            .into_iter()
            .flatten()
            .filter_map(|id| self.instructions.get(id))
            .filter(|i| i.state == InstructionState::Pending)
    }

    pub fn pending_count(&self, device_id: &str) -> usize {
        self.pending_for(device_id).count()
    }

    pub fn instruction(&self, id: &str) -> Option<&Instruction> {
        self.instructions.get(id)
    }

    pub fn instructions_for(&self, device_id: &str) -> Vec<Instruction> {
        self.queues
            .get(device_id)
            .into_iter()
            .flatten()
            .filter_map(|id| self.instructions.get(id))
            .cloned()
            .collect()
    }

    pub fn all_instructions(&self) -> impl Iterator<Item = &Instruction> {
        self.instructions.values()
    }

    pub fn records(&self) -> &[MeasurementRecord] {
        &self.records
    }

    pub fn has_record(&self, id: &RecordId) -> bool {
        self.record_ids.contains(id)
    }

    pub fn fleet(&self, now: DateTime<Utc>) -> Vec<DeviceSummary> {
        self.devices
            .iter()
            .map(|(id, d)| DeviceSummary {
                device_id: id.clone(),
                last_seen: d.last_seen,
                battery_pct: d.last_status.battery_pct,
                connectivity: d.last_status.connectivity,
                operator_name: d.last_status.operator_name.clone(),
                network_id: d.last_status.network_id.clone(),
                data_used_today: d.last_status.data_used_today,
                pending_instructions: self.pending_count(id),
                stale: now - d.last_seen > stale_after(),
            })
            .collect()
    }
}

/// Reads a log, ignoring an unterminated final line. Returns the entries and
/// the byte length of the valid prefix.
pub fn read_log(bytes: &[u8]) -> Result<(Vec<LogEntry>, usize), StoreError> {
    let valid = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |p| p + 1);
    let mut entries = Vec::new();
    for (n, line) in bytes[..valid].split(|b| *b == b'\n').enumerate() {
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let entry = serde_json::from_slice(line).map_err(|e| StoreError::Corrupt {
            line: n + 1,
            message: e.to_string(),
        })?;
        entries.push(entry);
    }
    Ok((entries, valid))
}

/// Durable store: every mutation is appended to the log before the index
/// changes, one JSON line per entry.
pub struct Store {
    index: Index,
    log: Option<File>,
    path: Option<PathBuf>,
    clock: Arc<dyn Clock>,
}

impl Store {
    /// A store without a backing log.
    pub fn in_memory(clock: Arc<dyn Clock>) -> Self {
        Self {
            index: Index::default(),
            log: None,
            path: None,
            clock,
        }
    }

    /// Opens (or creates) `dir/store.jsonl` and replays it. A torn final line
    /// left by a crash is discarded.
    pub fn open(dir: &Path, clock: Arc<dyn Clock>) -> Result<Self, StoreError> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(LOG_FILE);
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let (entries, valid) = read_log(&bytes)?;
        if valid < bytes.len() {
            tracing::warn!(
                "discarding {} bytes of torn log tail in {}",
                bytes.len() - valid,
                path.display()
            );
            file.set_len(valid as u64)?;
            file.seek(SeekFrom::End(0))?;
        }
        let mut index = Index::default();
        for e in &entries {
            index.apply(e);
        }
        Ok(Self {
            index,
            log: Some(file),
            path: Some(path),
            clock,
        })
    }

    pub fn log_path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn index(&self) -> &Index {
        &self.index
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    fn commit(&mut self, entries: Vec<LogEntry>) -> Result<(), StoreError> {
        if entries.is_empty() {
            return Ok(());
        }
        if let Some(log) = self.log.as_mut() {
            let mut buf = Vec::new();
            for e in &entries {
                serde_json::to_writer(&mut buf, e).map_err(std::io::Error::other)?;
                buf.push(b'\n');
            }
            log.write_all(&buf)?;
            log.flush()?;
        }
        for e in &entries {
            self.index.apply(e);
        }
        Ok(())
    }

    pub fn ingest_status(&mut self, status: DeviceStatus) -> Result<usize, StoreError> {
        status.validate()?;
        if let Some(prev) = self.index.devices.get(&status.device_id) {
            status.validate_successor(&prev.last_status)?;
        }
        let device = status.device_id.clone();
        let received_at = self.now();
        self.commit(vec![LogEntry::Status { received_at, status }])?;
        Ok(self.index.pending_count(&device))
    }

    /// Drains the device's pending queue, marking each instruction delivered.
    /// Devices that never reported get an empty list.
    pub fn fetch_instructions(&mut self, device_id: &str) -> Result<Vec<Instruction>, StoreError> {
        if !self.index.devices.contains_key(device_id) {
            return Ok(Vec::new());
        }
        let at = self.now();
        let ids: Vec<String> = self.index.pending_for(device_id).map(|i| i.id.clone()).collect();
        self.commit(
            ids.iter()
                .map(|id| LogEntry::InstructionDelivered { id: id.clone(), at })
                .collect(),
        )?;
        Ok(ids
            .iter()
            .filter_map(|id| self.index.instruction(id).cloned())
            .collect())
    }

    pub fn ack_instruction(
        &mut self,
        device_id: &str,
        id: &str,
        outcome: AckOutcome,
        detail: String,
    ) -> Result<Instruction, StoreError> {
        let instr = self
            .index
            .instruction(id)
            .filter(|i| i.device_id == device_id)
            .ok_or_else(|| StoreError::NotFound {
                what: "instruction",
                id: id.to_string(),
            })?;
        if instr.state != InstructionState::Delivered {
            return Err(StoreError::State {
                id: id.to_string(),
                state: instr.state,
            });
        }
        let at = self.now();
        self.commit(vec![LogEntry::InstructionResolved {
            id: id.to_string(),
            outcome,
            detail,
            at,
        }])?;
        Ok(self.index.instruction(id).cloned().expect("just resolved"))
    }

    /// Stores novel records; duplicates (by record id) are skipped silently and
    /// invalid records are listed in the outcome.
    pub fn submit_results(
        &mut self,
        device_id: &str,
        records: Vec<MeasurementRecord>,
    ) -> Result<SubmitOutcome, StoreError> {
        let received_at = self.now();
        let mut out = SubmitOutcome::default();
        let mut seen = HashSet::new();
        let mut entries = Vec::new();
        for record in records {
            let reject = if record.device_id != device_id {
                Some(format!(
                    "device_id {:?} does not match {device_id:?}",
                    record.device_id
                ))
            } else {
                record.validate().err().map(|e| e.to_string())
            };
            if let Some(reason) = reject {
                out.rejected.push(Rejected {
                    record_id: record.record_id.to_string(),
                    reason,
                });
                continue;
            }
            if self.index.has_record(&record.record_id) || !seen.insert(record.record_id.clone()) {
                continue;
            }
            out.accepted += 1;
            entries.push(LogEntry::Record { received_at, record });
        }
        self.commit(entries)?;
        Ok(out)
    }

    pub fn enqueue_instruction(&mut self, new: NewInstruction) -> Result<Instruction, StoreError> {
        let id = match new.id {
            Some(id) if id.trim().is_empty() => {
                return Err(StoreError::Validation {
                    field: "id".into(),
                    reason: "must not be empty".into(),
                })
            }
            Some(id) => id,
            None => uuid::Uuid::new_v4().simple().to_string(),
        };
        if self.index.instruction(&id).is_some() {
            return Err(StoreError::Conflict(id));
        }
        let instruction = Instruction {
            id: id.clone(),
            device_id: new.device_id,
            created_at: self.now(),
            kind: new.kind,
            state: InstructionState::Pending,
            outcome: None,
        };
        instruction.validate()?;
        self.commit(vec![LogEntry::InstructionCreated { instruction }])?;
        Ok(self.index.instruction(&id).cloned().expect("just created"))
    }

    pub fn fleet_snapshot(&self) -> Vec<DeviceSummary> {
        self.index.fleet(self.now())
    }

    /// Newest first, optionally filtered by kind.
    pub fn device_records(
        &self,
        device_id: &str,
        kind: Option<ExperimentKind>,
        limit: usize,
    ) -> Vec<MeasurementRecord> {
        let mut out: Vec<_> = self
            .index
            .records
            .iter()
            .filter(|r| r.device_id == device_id)
            .filter(|r| kind.is_none_or(|k| r.experiment_kind == k))
            .cloned()
            .collect();
        out.sort_by(|a, b| {
            b.timestamp
                .cmp(&a.timestamp)
                .then_with(|| b.record_id.cmp(&a.record_id))
        });
        out.truncate(limit);
        out
    }
}
