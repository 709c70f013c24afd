use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::ValidationError;
use crate::GIB;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Speedtest,
    Latency,
    Dns,
    Cdn,
    Web,
    /// Import-only: produced by parsing player statistics logs, never scheduled.
    Youtube,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Speedtest,
        ExperimentKind::Latency,
        ExperimentKind::Dns,
        ExperimentKind::Cdn,
        ExperimentKind::Web,
        ExperimentKind::Youtube,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Speedtest => "speedtest",
            ExperimentKind::Latency => "latency",
            ExperimentKind::Dns => "dns",
            ExperimentKind::Cdn => "cdn",
            ExperimentKind::Web => "web",
            ExperimentKind::Youtube => "youtube",
        }
    }

    pub fn needs_targets(self) -> bool {
        matches!(
            self,
            ExperimentKind::Latency | ExperimentKind::Dns | ExperimentKind::Cdn | ExperimentKind::Web
        )
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = ValidationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ValidationError::new("kind", format!("unknown experiment kind {s:?}")))
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectivityRule {
    /// Connectivity must be exactly `mobile`; a device also attached to WiFi
    /// does not measure.
    #[default]
    MobileOnly,
    Any,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleRule {
    pub interval_s: u64,
    pub connectivity_required: ConnectivityRule,
    pub battery_floor_pct: u8,
    pub daily_data_cap: u64,
}

impl Default for ScheduleRule {
    fn default() -> Self {
        Self {
            interval_s: 30 * 60,
            connectivity_required: ConnectivityRule::MobileOnly,
            battery_floor_pct: 15,
            daily_data_cap: 4 * GIB,
        }
    }
}

impl ScheduleRule {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.interval_s == 0 {
            return Err(ValidationError::new("schedule.interval_s", "must be positive"));
        }
        if self.battery_floor_pct > 100 {
            return Err(ValidationError::new(
                "schedule.battery_floor_pct",
                "must be within 0..=100",
            ));
        }
        Ok(())
    }
}

/// A pre-installed experiment. `params` is a flat string map; list-valued
/// parameters such as `targets` are comma separated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub id: String,
    pub kind: ExperimentKind,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
    #[serde(default)]
    pub schedule: ScheduleRule,
}

impl ExperimentSpec {
    pub fn targets(&self) -> Vec<String> {
        self.list_param("targets")
    }

    pub fn list_param(&self, key: &str) -> Vec<String> {
        self.params
            .get(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|t| !t.is_empty())
                    .map(str::to_string)
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn param(&self, key: &str) -> Option<&str> {
        self.params.get(key).map(String::as_str)
    }

    pub fn param_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ValidationError> {
        match self.params.get(key) {
            None => Ok(default),
            Some(raw) => raw.trim().parse().map_err(|_| {
                ValidationError::new(format!("params.{key}"), format!("cannot parse {raw:?}"))
            }),
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.id.trim().is_empty() {
            return Err(ValidationError::new("id", "must not be empty"));
        }
        if self.kind == ExperimentKind::Youtube {
            return Err(ValidationError::new(
                "kind",
                "youtube statistics are imported from logs, not scheduled",
            ));
        }
        if self.kind.needs_targets() && self.targets().is_empty() {
            return Err(ValidationError::new(
                "params.targets",
                format!("{} experiments need at least one target", self.kind),
            ));
        }
        if self.kind == ExperimentKind::Speedtest && self.param("server").is_none() {
            return Err(ValidationError::new("params.server", "speedtest needs a server"));
        }
        self.schedule.validate()
    }
}
