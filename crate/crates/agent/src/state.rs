use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use amigo_core::AckOutcome;

use crate::error::AgentError;

/// Bytes used on one UTC day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataLedger {
    pub day: NaiveDate,
    pub bytes: u64,
}

impl DataLedger {
    pub fn new(now: DateTime<Utc>) -> Self {
        Self {
            day: now.date_naive(),
            bytes: 0,
        }
    }

    /// Usage for `now`'s day; a ledger from an earlier day reads as zero.
    pub fn used(&self, now: DateTime<Utc>) -> u64 {
        if now.date_naive() == self.day {
            self.bytes
        } else {
            0
        }
    }

    /// Rolls over to `now`'s day if needed, then adds `bytes`.
    pub fn account(&mut self, bytes: u64, now: DateTime<Utc>) {
        let today = now.date_naive();
        if today != self.day {
            self.day = today;
            self.bytes = 0;
        }
        self.bytes = self.bytes.saturating_add(bytes);
    }
}

/// An instruction outcome not yet confirmed by the server.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingAck {
    pub id: String,
    pub outcome: AckOutcome,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub paused_until: Option<DateTime<Utc>>,
    pub last_run: BTreeMap<String, DateTime<Utc>>,
    pub ledger: DataLedger,
    /// Experiments forced by `run_now`, cleared when they next run.
    #[serde(default)]
    pub run_now: BTreeSet<String>,
    #[serde(default)]
    pub pending_acks: Vec<PendingAck>,
    #[serde(default)]
    pub last_report: Option<DateTime<Utc>>,
    #[serde(default)]
    pub last_reset_day: Option<NaiveDate>,
}

pub const STATE_FILE: &str = "state.json";

impl AgentState {
    pub fn new(now: DateTime<Utc>) -> Self {
        Self {
            paused_until: None,
            last_run: BTreeMap::new(),
            ledger: DataLedger::new(now),
            run_now: BTreeSet::new(),
            pending_acks: Vec::new(),
            last_report: None,
            last_reset_day: None,
        }
    }

    pub fn is_paused(&self, now: DateTime<Utc>) -> bool {
        self.paused_until.is_some_and(|t| t > now)
    }

    pub fn load_or_new(dir: &Path, now: DateTime<Utc>) -> Result<Self, AgentError> {
        let path = dir.join(STATE_FILE);
        match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| AgentError::Io {
                context: format!("parsing {}", path.display()),
                source: std::io::Error::other(e),
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::new(now)),
            Err(e) => Err(AgentError::Io {
                context: format!("reading {}", path.display()),
                source: e,
            }),
        }
    }

    /// Writes atomically via a temporary file and rename.
    pub fn save(&self, dir: &Path) -> Result<(), AgentError> {
        let io = |context: &str, source| AgentError::Io {
            context: format!("{context} {}", dir.display()),
            source,
        };
        std::fs::create_dir_all(dir).map_err(|e| io("creating", e))?;
        let tmp = dir.join(format!("{STATE_FILE}.tmp"));
        let text = serde_json::to_vec_pretty(self).map_err(|e| io("encoding state for", std::io::Error::other(e)))?;
        std::fs::write(&tmp, text).map_err(|e| io("writing state in", e))?;
        std::fs::rename(&tmp, dir.join(STATE_FILE)).map_err(|e| io("renaming state in", e))
    }
}
