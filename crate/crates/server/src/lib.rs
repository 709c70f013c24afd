//! Control server: status ingest, instruction queue, result collection and
//! fleet queries, persisted in an append-only JSONL log.

pub mod api;
pub mod store;

pub use api::{router, spawn, thresholds_document, AckBody, AppState, PendingAck, ServerHandle};
pub use store::{
    read_log, stale_after, DeviceSummary, Index, LogEntry, Rejected, Store, StoreError,
    SubmitOutcome, LOG_FILE,
};
