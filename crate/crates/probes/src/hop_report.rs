//! JSON hop report, the import format for path/latency measurements taken
//! with external tools.
//!
//! ```json
//! {"target": "google.com", "probes_per_hop": 10,
//!  "hubs": [{"hop": 1, "address": "10.0.0.1", "sent": 10, "lost": 0,
//!            "avg_ms": 3.1, "best_ms": 2.5, "worst_ms": 4.0}]}
//! ```

use amigo_core::{HopStat, LatencyResult};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hub {
    pub hop: u32,
    pub address: String,
    pub sent: u32,
    pub lost: u32,
    pub avg_ms: f64,
    pub best_ms: f64,
    pub worst_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopReport {
    pub target: String,
    pub probes_per_hop: u32,
    pub hubs: Vec<Hub>,
    #[serde(default = "complete_default", skip_serializing_if = "is_true")]
    pub complete: bool,
}

fn complete_default() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

#[derive(Debug, Error)]
pub enum HopReportError {
    #[error("malformed hop report: {0}")]
    Json(#[from] serde_json::Error),
    #[error("hop report has no hubs (no terminal hop)")]
    Empty,
    #[error("hubs[{index}].hop: expected {expected}, found {found}")]
    OutOfOrder { index: usize, expected: u32, found: u32 },
    #[error("hubs[{index}].{field}: {reason}")]
    Invalid {
        index: usize,
        field: &'static str,
        reason: String,
    },
}

pub fn parse_hop_report(text: &str) -> Result<LatencyResult, HopReportError> {
    let report: HopReport = serde_json::from_str(text)?;
    report.into_result()
}

impl HopReport {
    pub fn into_result(self) -> Result<LatencyResult, HopReportError> {
        if self.hubs.is_empty() {
            return Err(HopReportError::Empty);
        }
        let mut hops = Vec::with_capacity(self.hubs.len());
        for (index, hub) in self.hubs.into_iter().enumerate() {
            let expected = index as u32 + 1;
            if hub.hop != expected {
                return Err(HopReportError::OutOfOrder {
                    index,
                    expected,
                    found: hub.hop,
                });
            }
            if hub.lost > hub.sent {
                return Err(HopReportError::Invalid {
                    index,
                    field: "lost",
                    reason: format!("{} exceeds sent {}", hub.lost, hub.sent),
                });
            }
            for (field, v) in [("avg_ms", hub.avg_ms), ("best_ms", hub.best_ms), ("worst_ms", hub.worst_ms)] {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(HopReportError::Invalid {
                        index,
                        field,
                        reason: format!("{v} is not a non-negative number"),
                    });
                }
            }
            if hub.sent > hub.lost && !(hub.best_ms <= hub.avg_ms && hub.avg_ms <= hub.worst_ms) {
                return Err(HopReportError::Invalid {
                    index,
                    field: "avg_ms",
                    reason: "need best_ms <= avg_ms <= worst_ms".into(),
                });
            }
            hops.push(HopStat {
                hop_index: hub.hop,
                address: hub.address,
                sent: hub.sent,
                lost: hub.lost,
                avg_rtt_ms: hub.avg_ms,
                best_rtt_ms: hub.best_ms,
                worst_rtt_ms: hub.worst_ms,
            });
        }
        Ok(LatencyResult::from_hops(self.target, hops, self.complete))
    }

    pub fn from_result(result: &LatencyResult) -> Self {
        Self {
            target: result.target.clone(),
            probes_per_hop: result.hops.iter().map(|h| h.sent).max().unwrap_or(0),
            hubs: result
                .hops
                .iter()
                .map(|h| Hub {
                    hop: h.hop_index,
                    address: h.address.clone(),
                    sent: h.sent,
                    lost: h.lost,
                    avg_ms: h.avg_rtt_ms,
                    best_ms: h.best_rtt_ms,
                    worst_ms: h.worst_rtt_ms,
                })
                .collect(),
            complete: result.complete,
        }
    }
}

pub fn emit_hop_report(result: &LatencyResult) -> String {
    serde_json::to_string_pretty(&HopReport::from_result(result)).expect("hop report serializes")
}
