//! Environment sampling: battery, connectivity, network identity and GPS.

use std::path::{Path, PathBuf};

use amigo_core::{Connectivity, GeoPoint};
use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::error::AgentError;

/// One sample. `None` marks a sensor that could not be read.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SensorReading {
    #[serde(default)]
    pub battery_pct: Option<u8>,
    #[serde(default)]
    pub connectivity: Option<Connectivity>,
    #[serde(default)]
    pub operator_name: Option<String>,
    #[serde(default)]
    pub network_id: Option<String>,
    #[serde(default)]
    pub gps: Option<GeoPoint>,
}

pub trait SensorSource: Send {
    fn read(&mut self, now: DateTime<Utc>) -> SensorReading;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineStep {
    /// Seconds after the timeline start.
    pub at_s: i64,
    #[serde(flatten)]
    pub reading: SensorReading,
}

/// Step-function timeline: the reading at `t` is that of the last step at
/// or before `t`; before the first step every sensor reads as absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub start: DateTime<Utc>,
    pub steps: Vec<TimelineStep>,
}

impl Timeline {
    pub fn new(start: DateTime<Utc>, mut steps: Vec<TimelineStep>) -> Self {
        steps.sort_by_key(|s| s.at_s);
        Self { start, steps }
    }

    pub fn parse(text: &str) -> Result<Self, AgentError> {
        let t: Timeline = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| AgentError::Timeline(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| AgentError::Timeline(e.to_string()))?
        };
        if t.steps.windows(2).any(|w| w[1].at_s < w[0].at_s) {
            return Err(AgentError::Timeline("steps must be ordered by at_s".into()));
        }
        if let Some(s) = t.steps.iter().find(|s| s.reading.battery_pct.is_some_and(|b| b > 100)) {
            return Err(AgentError::Timeline(format!("battery above 100% at {}s", s.at_s)));
        }
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let text = std::fs::read_to_string(path).map_err(|e| AgentError::Io {
            context: format!("reading {}", path.display()),
            source: e,
        })?;
        Self::parse(&text)
    }

    pub fn at(&self, now: DateTime<Utc>) -> SensorReading {
        let offset = (now - self.start).num_seconds();
        let idx = self.steps.partition_point(|s| s.at_s <= offset);
        idx.checked_sub(1)
            .map(|i| self.steps[i].reading.clone())
            .unwrap_or_default()
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.start + Duration::seconds(self.steps.last().map_or(0, |s| s.at_s))
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedSensors {
    timeline: Timeline,
}

impl ScriptedSensors {
    pub fn new(timeline: Timeline) -> Self {
        Self { timeline }
    }

    pub fn timeline(&self) -> &Timeline {
        &self.timeline
    }
}

impl SensorSource for ScriptedSensors {
    fn read(&mut self, now: DateTime<Utc>) -> SensorReading {
        self.timeline.at(now)
    }
}

/// Reads what a Linux host exposes under `/sys`. Operator identity is not
/// discoverable without modem access, so it comes from configuration.
#[derive(Debug, Clone)]
pub struct HostSensors {
    pub sys_root: PathBuf,
    pub operator_name: Option<String>,
    pub network_id: Option<String>,
}

impl HostSensors {
    pub fn new(operator_name: Option<String>, network_id: Option<String>) -> Self {
        Self {
            sys_root: PathBuf::from("/sys"),
            operator_name,
            network_id,
        }
    }

    fn battery(&self) -> Option<u8> {
        let dir = std::fs::read_dir(self.sys_root.join("class/power_supply")).ok()?;
        dir.flatten()
            .filter(|e| {
                std::fs::read_to_string(e.path().join("type"))
                    .map(|t| t.trim() == "Battery")
                    .unwrap_or(false)
            })
            .find_map(|e| std::fs::read_to_string(e.path().join("capacity")).ok())
            .and_then(|c| c.trim().parse::<u8>().ok())
            .filter(|b| *b <= 100)
    }

    fn connectivity(&self) -> Option<Connectivity> {
        let dir = std::fs::read_dir(self.sys_root.join("class/net")).ok()?;
        let (mut wifi, mut mobile) = (false, false);
        for e in dir.flatten() {
            let name = e.file_name().to_string_lossy().to_string();
            let up = std::fs::read_to_string(e.path().join("operstate"))
                .map(|s| s.trim() == "up")
                .unwrap_or(false);
            if !up {
                continue;
            }
            if name.starts_with("wl") || e.path().join("wireless").exists() {
                wifi = true;
            } else if ["wwan", "rmnet", "ppp", "usb"].iter().any(|p| name.starts_with(p)) {
                mobile = true;
            }
        }
        Some(match (wifi, mobile) {
            (true, true) => Connectivity::Both,
            (true, false) => Connectivity::Wifi,
            (false, true) => Connectivity::Mobile,
            (false, false) => Connectivity::None,
        })
    }
}

impl SensorSource for HostSensors {
    fn read(&mut self, _now: DateTime<Utc>) -> SensorReading {
        SensorReading {
            battery_pct: self.battery(),
            connectivity: self.connectivity(),
            operator_name: self.operator_name.clone(),
            network_id: self.network_id.clone(),
            gps: None,
        }
    }
}
