use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use amigo_core::{ConnectivityRule, ExperimentKind, ExperimentSpec, ScheduleRule, ValidationError};
use serde::{Deserialize, Serialize};

use crate::error::AgentError;

fn default_report_interval() -> u64 {
    300
}

fn default_reset_hour() -> u32 {
    3
}

/// Experiment entry as written in a config file. A missing `schedule` takes
/// the agent-wide default.
#[derive(Debug, Clone, Deserialize)]
struct RawExperiment {
    id: String,
    kind: ExperimentKind,
    #[serde(default)]
    params: BTreeMap<String, String>,
    #[serde(default)]
    schedule: Option<ScheduleRule>,
}

#[derive(Debug, Deserialize)]
struct RawConfig {
    device_id: String,
    server_url: String,
    #[serde(default = "default_report_interval")]
    report_interval_s: u64,
    #[serde(default)]
    schedule: ScheduleRule,
    #[serde(default)]
    experiments: Vec<RawExperiment>,
    spool_dir: PathBuf,
    #[serde(default = "default_reset_hour")]
    nightly_reset_hour_utc: u32,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub device_id: String,
    pub server_url: String,
    pub report_interval_s: u64,
    /// Default rule; per-experiment rules start from it.
    pub schedule: ScheduleRule,
    pub experiments: Vec<ExperimentSpec>,
    pub spool_dir: PathBuf,
    pub nightly_reset_hour_utc: u32,
    /// Seeds record-id generation; entropy when absent.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl AgentConfig {
    pub fn new(device_id: impl Into<String>, server_url: impl Into<String>, spool_dir: impl Into<PathBuf>) -> Self {
        Self {
            device_id: device_id.into(),
            server_url: server_url.into(),
            report_interval_s: default_report_interval(),
            schedule: ScheduleRule::default(),
            experiments: Vec::new(),
            spool_dir: spool_dir.into(),
            nightly_reset_hour_utc: default_reset_hour(),
            seed: None,
        }
    }

    /// Parses a TOML or JSON document (JSON when it starts with `{`).
    pub fn parse(text: &str) -> Result<Self, AgentError> {
        let raw: RawConfig = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| AgentError::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| AgentError::Config(e.to_string()))?
        };
        let experiments = raw
            .experiments
            .into_iter()
            .map(|e| ExperimentSpec {
                id: e.id,
                kind: e.kind,
                params: e.params,
                schedule: e.schedule.unwrap_or_else(|| raw.schedule.clone()),
            })
            .collect();
        let cfg = Self {
            device_id: raw.device_id,
            server_url: raw.server_url,
            report_interval_s: raw.report_interval_s,
            schedule: raw.schedule,
            experiments,
            spool_dir: raw.spool_dir,
            nightly_reset_hour_utc: raw.nightly_reset_hour_utc,
            seed: raw.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let text = std::fs::read_to_string(path).map_err(|e| AgentError::Io {
            context: format!("reading {}", path.display()),
            source: e,
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.device_id.trim().is_empty() {
            return Err(ValidationError::new("device_id", "must not be empty"));
        }
        if self.report_interval_s == 0 {
            return Err(ValidationError::new("report_interval_s", "must be positive"));
        }
        if self.nightly_reset_hour_utc > 23 {
            return Err(ValidationError::new("nightly_reset_hour_utc", "must be within 0..=23"));
        }
        self.schedule.validate()?;
        let mut ids = std::collections::HashSet::new();
        for e in &self.experiments {
            e.validate()?;
            if !ids.insert(e.id.as_str()) {
                return Err(ValidationError::new("experiments", format!("duplicate id {:?}", e.id)));
            }
        }
        Ok(())
    }

    pub fn experiment(&self, id: &str) -> Option<&ExperimentSpec> {
        self.experiments.iter().find(|e| e.id == id)
    }

    /// Applies an `update_config` instruction. Schedule keys update the
    /// default rule and every experiment's rule. Nothing changes on error.
    pub fn update(&mut self, key: &str, value: &str) -> Result<(), ValidationError> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ValidationError> {
            value
                .trim()
                .parse()
                .map_err(|_| ValidationError::new(key, format!("cannot parse {value:?}")))
        }
        let mut next = self.clone();
        let mut rule = next.schedule.clone();
        match key {
            "report_interval_s" => next.report_interval_s = num(key, value)?,
            "server_url" => {
                if !(value.starts_with("http://") || value.starts_with("https://")) {
                    return Err(ValidationError::new(key, "must be an http(s) URL"));
                }
                next.server_url = value.trim_end_matches('/').to_string();
            }
            "schedule.interval_s" | "interval_s" => rule.interval_s = num(key, value)?,
            "battery_floor_pct" | "schedule.battery_floor_pct" => rule.battery_floor_pct = num(key, value)?,
            "daily_data_cap_bytes" | "schedule.daily_data_cap" => rule.daily_data_cap = num(key, value)?,
            "connectivity_required" | "schedule.connectivity_required" => {
                rule.connectivity_required = match value.trim() {
                    "mobile_only" => ConnectivityRule::MobileOnly,
                    "any" => ConnectivityRule::Any,
                    other => {
                        return Err(ValidationError::new(key, format!("unknown rule {other:?}")))
                    }
                }
            }
            _ => return Err(ValidationError::new(key, "unknown config key")),
        }
        if rule != next.schedule {
            for e in &mut next.experiments {
                e.schedule = rule.clone();
            }
            next.schedule = rule;
        }
        next.validate()?;
        *self = next;
        Ok(())
    }
}
