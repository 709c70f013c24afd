use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::ValidationError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connectivity {
    Wifi,
    Mobile,
    Both,
    None,
}

impl Connectivity {
    pub fn as_str(self) -> &'static str {
        match self {
            Connectivity::Wifi => "wifi",
            Connectivity::Mobile => "mobile",
            Connectivity::Both => "both",
            Connectivity::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

/// Periodic self-report of a measurement endpoint.
///
/// `battery_pct` is `None` when the battery could not be read (for example on
/// a mains-powered host); the scheduler treats that as below any floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceStatus {
    pub device_id: String,
    pub timestamp: DateTime<Utc>,
    #[serde(default)]
    pub battery_pct: Option<u8>,
    pub connectivity: Connectivity,
    #[serde(default)]
    pub operator_name: String,
    #[serde(default)]
    pub network_id: String,
    #[serde(default)]
    pub gps: Option<GeoPoint>,
    pub data_used_today: u64,
    #[serde(default)]
    pub agent_version: String,
}

impl DeviceStatus {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.device_id.trim().is_empty() {
            return Err(ValidationError::new("device_id", "must not be empty"));
        }
        if let Some(pct) = self.battery_pct {
            if pct > 100 {
                return Err(ValidationError::new(
                    "battery_pct",
                    format!("{pct} is outside 0..=100"),
                ));
            }
        }
        if let Some(gps) = self.gps {
            if !(-90.0..=90.0).contains(&gps.lat) {
                return Err(ValidationError::new("gps.lat", format!("{} out of range", gps.lat)));
            }
            if !(-180.0..=180.0).contains(&gps.lon) {
                return Err(ValidationError::new("gps.lon", format!("{} out of range", gps.lon)));
            }
        }
        Ok(())
    }

    /// Checks the cross-report invariant: within one UTC day the data counter
    /// of a device never goes down.
    pub fn validate_successor(&self, previous: &DeviceStatus) -> Result<(), ValidationError> {
        if previous.device_id == self.device_id
            && previous.timestamp <= self.timestamp
            && previous.timestamp.date_naive() == self.timestamp.date_naive()
            && self.data_used_today < previous.data_used_today
        {
            return Err(ValidationError::new(
                "data_used_today",
                format!(
                    "decreased from {} to {} within the same UTC day",
                    previous.data_used_today, self.data_used_today
                ),
            ));
        }
        Ok(())
    }
}
