//! Scenario documents (TOML or JSON).

use std::collections::{BTreeMap, HashSet};
use std::net::Ipv4Addr;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    #[serde(default)]
    pub targets: Vec<Target>,
    #[serde(default)]
    pub dns: DnsConfig,
    #[serde(default)]
    pub throughput: ThroughputConfig,
    #[serde(default)]
    pub assets: Vec<Asset>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub name: String,
    /// Round-trip delay to each hop, cumulative from the client.
    pub hop_cumulative_delays_ms: Vec<f64>,
    #[serde(default)]
    pub jitter_ms: f64,
    /// Optional per-hop addresses; defaults to `10.<t>.<k>.1` with the
    /// target name at the terminal hop.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hop_addresses: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DnsConfig {
    #[serde(default)]
    pub delay_ms: f64,
    #[serde(default)]
    pub records: BTreeMap<String, String>,
    /// Names answered with SERVFAIL. Names absent from `records` get NXDOMAIN.
    #[serde(default)]
    pub fail_domains: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThroughputConfig {
    pub down_mbps: f64,
    pub up_mbps: f64,
}

impl Default for ThroughputConfig {
    fn default() -> Self {
        Self {
            down_mbps: 30.0,
            up_mbps: 15.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Asset {
    pub path: String,
    pub bytes: u64,
    #[serde(default)]
    pub think_time_ms: f64,
    pub cache_policy: CachePolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CachePolicy {
    #[serde(flatten)]
    pub mode: CacheMode,
    pub header_style: HeaderStyle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CacheMode {
    AlwaysHit,
    AlwaysMiss,
    HitRatio { hit_ratio: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeaderStyle {
    Cf,
    XCacheSingle,
    XCacheDual,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("target {target:?}: hop delays must be strictly increasing, got {delays:?}")]
    NonIncreasingHopDelays { target: String, delays: Vec<f64> },
    #[error("target {target:?}: {reason}")]
    BadTarget { target: String, reason: String },
    #[error("duplicate target name {0:?}")]
    DuplicateTarget(String),
    #[error("asset {path:?}: hit_ratio {value} outside [0, 1]")]
    BadHitRatio { path: String, value: f64 },
    #[error("duplicate asset path {0:?}")]
    DuplicateAssetPath(String),
    #[error("asset {path:?}: {reason}")]
    BadAsset { path: String, reason: String },
    #[error("dns: {0}")]
    BadDns(String),
    #[error("throughput: {0}")]
    BadThroughput(String),
}

/// Outcome of one named invariant check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn finite_non_negative(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    /// Parses without validating. JSON is detected by a leading `{`.
    pub fn parse_unchecked(text: &str) -> Result<Self, ScenarioError> {
        if text.trim_start().starts_with('{') {
            Self::from_json(text)
        } else {
            Self::from_toml(text)
        }
    }

    pub fn read_unchecked(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_unchecked(&text)
    }

    pub fn target(&self, name: &str) -> Option<&Target> {
        self.targets.iter().find(|t| t.name == name)
    }

    pub fn asset(&self, path: &str) -> Option<&Asset> {
        self.assets.iter().find(|a| a.path == path)
    }

    /// Runs every invariant check and reports each one.
    pub fn checks(&self) -> Vec<(Check, Option<ScenarioError>)> {
        let mut out = Vec::new();
        let mut record = |name: String, res: Result<(), ScenarioError>| {
            let (passed, detail, err) = match res {
                Ok(()) => (true, "ok".to_string(), None),
                Err(e) => (false, e.to_string(), Some(e)),
            };
            out.push((Check { name, passed, detail }, err));
        };

        let mut names = HashSet::new();
        for t in &self.targets {
            record(format!("target {:?} hop delays", t.name), check_target(t));
            record(
                format!("target {:?} unique", t.name),
                if names.insert(t.name.as_str()) {
                    Ok(())
                } else {
                    Err(ScenarioError::DuplicateTarget(t.name.clone()))
                },
            );
        }
        let mut paths = HashSet::new();
        for a in &self.assets {
            record(format!("asset {:?} policy", a.path), check_asset(a));
            record(
                format!("asset {:?} unique", a.path),
                if paths.insert(a.path.as_str()) {
                    Ok(())
                } else {
                    Err(ScenarioError::DuplicateAssetPath(a.path.clone()))
                },
            );
        }
        record("dns config".to_string(), check_dns(&self.dns));
        record("throughput caps".to_string(), check_throughput(&self.throughput));
        out
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        match self.checks().into_iter().find_map(|(_, e)| e) {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

fn check_target(t: &Target) -> Result<(), ScenarioError> {
    let bad = |reason: &str| ScenarioError::BadTarget {
        target: t.name.clone(),
        reason: reason.to_string(),
    };
    if t.name.is_empty() || t.name.contains(char::is_whitespace) {
        return Err(bad("name must be non-empty without whitespace"));
    }
    if t.hop_cumulative_delays_ms.is_empty() {
        return Err(bad("needs at least one hop"));
    }
    if !t.hop_cumulative_delays_ms.iter().all(|d| finite_non_negative(*d)) {
        return Err(bad("hop delays must be non-negative"));
    }
    if t.hop_cumulative_delays_ms.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ScenarioError::NonIncreasingHopDelays {
            target: t.name.clone(),
            delays: t.hop_cumulative_delays_ms.clone(),
        });
    }
    if !finite_non_negative(t.jitter_ms) {
        return Err(bad("jitter_ms must be non-negative"));
    }
    if !t.hop_addresses.is_empty() && t.hop_addresses.len() != t.hop_cumulative_delays_ms.len() {
        return Err(bad("hop_addresses must match the number of hops"));
    }
    if t.hop_addresses.iter().any(|a| a.is_empty() || a.contains(char::is_whitespace)) {
        return Err(bad("hop addresses must be non-empty without whitespace"));
    }
    Ok(())
}

fn check_asset(a: &Asset) -> Result<(), ScenarioError> {
    if !a.path.starts_with('/') {
        return Err(ScenarioError::BadAsset {
            path: a.path.clone(),
            reason: "path must start with '/'".into(),
        });
    }
    if a.path == "/metrics" {
        return Err(ScenarioError::BadAsset {
            path: a.path.clone(),
            reason: "/metrics is reserved".into(),
        });
    }
    if !finite_non_negative(a.think_time_ms) {
        return Err(ScenarioError::BadAsset {
            path: a.path.clone(),
            reason: "think_time_ms must be non-negative".into(),
        });
    }
    if let CacheMode::HitRatio { hit_ratio } = a.cache_policy.mode {
        if !(0.0..=1.0).contains(&hit_ratio) {
            return Err(ScenarioError::BadHitRatio {
                path: a.path.clone(),
                value: hit_ratio,
            });
        }
    }
    Ok(())
}

fn check_dns(d: &DnsConfig) -> Result<(), ScenarioError> {
    if !finite_non_negative(d.delay_ms) {
        return Err(ScenarioError::BadDns("delay_ms must be non-negative".into()));
    }
    for (name, ip) in &d.records {
        if ip.parse::<Ipv4Addr>().is_err() {
            return Err(ScenarioError::BadDns(format!("record {name:?} has bad IPv4 {ip:?}")));
        }
    }
    Ok(())
}

fn check_throughput(t: &ThroughputConfig) -> Result<(), ScenarioError> {
    for (dir, v) in [("down_mbps", t.down_mbps), ("up_mbps", t.up_mbps)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(ScenarioError::BadThroughput(format!("{dir} must be positive, got {v}")));
        }
    }
    Ok(())
}

/// Parses and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let s = Scenario::read_unchecked(path)?;
    s.validate()?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"
seed = 7

[[targets]]
name = "google"
hop_cumulative_delays_ms = [10, 25, 60]

[dns]
delay_ms = 40
records = { "cdn.example" = "127.0.0.1" }

[throughput]
down_mbps = 30
up_mbps = 15

[[assets]]
path = "/jquery.min.js"
bytes = 1000
cache_policy = { mode = "hit_ratio", hit_ratio = 0.5, header_style = "x_cache_dual" }
"#;

    #[test]
    fn minimal_scenario_is_valid() {
        let s = Scenario::from_toml(MINIMAL).unwrap();
        s.validate().unwrap();
        assert_eq!(s.targets[0].hop_cumulative_delays_ms, vec![10.0, 25.0, 60.0]);
        assert_eq!(
            s.assets[0].cache_policy.mode,
            CacheMode::HitRatio { hit_ratio: 0.5 }
        );
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(Scenario::parse_unchecked(&json).unwrap(), s);
    }

    #[test]
    fn named_validation_errors() {
        let s = Scenario::from_toml(&MINIMAL.replace("[10, 25, 60]", "[10, 10, 60]")).unwrap();
        assert!(matches!(s.validate(), Err(ScenarioError::NonIncreasingHopDelays { .. })));

        let s = Scenario::from_toml(&MINIMAL.replace("hit_ratio = 0.5", "hit_ratio = 1.3")).unwrap();
        assert!(matches!(s.validate(), Err(ScenarioError::BadHitRatio { value, .. }) if value == 1.3));

        let mut s = Scenario::from_toml(MINIMAL).unwrap();
        s.assets.push(s.assets[0].clone());
        assert!(matches!(s.validate(), Err(ScenarioError::DuplicateAssetPath(_))));

        let mut s = Scenario::from_toml(MINIMAL).unwrap();
        s.throughput.up_mbps = 0.0;
        assert!(matches!(s.validate(), Err(ScenarioError::BadThroughput(_))));
    }

    #[test]
    fn checks_report_every_invariant() {
        let s = Scenario::from_toml(MINIMAL).unwrap();
        let checks = s.checks();
        assert_eq!(checks.len(), 6);
        assert!(checks.iter().all(|(c, _)| c.passed));
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(Scenario::from_toml(&format!("{MINIMAL}\nbogus = 1\n")).is_err());
    }
}
