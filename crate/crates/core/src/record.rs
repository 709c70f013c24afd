//! Measurement records and their per-probe payloads.

use chrono::{DateTime, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classify::{classify_resolver, CacheStatus, ResolverClass};
use crate::error::ValidationError;
use crate::experiment::ExperimentKind;

/// Client-generated 128-bit identifier rendered as 32 lowercase hex digits.
/// Uploads are idempotent on it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RecordId(String);

impl RecordId {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self(format!("{:032x}", rng.random::<u128>()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::str::FromStr for RecordId {
    type Err = ValidationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if !s.is_empty() && s.len() <= 64 && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-') {
            Ok(Self(s.to_string()))
        } else {
            Err(ValidationError::new("record_id", format!("malformed id {s:?}")))
        }
    }
}

impl std::fmt::Display for RecordId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Megabits per second for `bytes` moved in `duration_s` seconds.
pub fn compute_throughput_mbps(bytes: u64, duration_s: f64) -> f64 {
    if duration_s <= 0.0 {
        return 0.0;
    }
    bytes as f64 * 8.0 / duration_s / 1e6
}

/// Both directions run for the same nominal `duration_s`; rates are computed
/// against that nominal duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedtestResult {
    pub down_mbps: f64,
    pub up_mbps: f64,
    pub bytes_down: u64,
    pub bytes_up: u64,
    pub duration_s: f64,
    /// Set when a direction moved no data or ended more than 10% early.
    #[serde(default)]
    pub flagged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopStat {
    pub hop_index: u32,
    pub address: String,
    pub sent: u32,
    pub lost: u32,
    pub avg_rtt_ms: f64,
    pub best_rtt_ms: f64,
    pub worst_rtt_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyResult {
    pub target: String,
    pub hops: Vec<HopStat>,
    pub hop_count: u32,
    pub final_avg_rtt_ms: f64,
    /// False when probing stopped before the terminal hop answered.
    #[serde(default = "yes")]
    pub complete: bool,
}

fn yes() -> bool {
    true
}

impl LatencyResult {
    /// Builds a result whose derived fields follow from `hops`.
    pub fn from_hops(target: impl Into<String>, hops: Vec<HopStat>, complete: bool) -> Self {
        let final_avg_rtt_ms = hops.last().map_or(0.0, |h| h.avg_rtt_ms);
        Self {
            target: target.into(),
            hop_count: hops.len() as u32,
            hops,
            final_avg_rtt_ms,
            complete,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnsResult {
    pub domain: String,
    pub resolver_ip: String,
    pub resolver_class: ResolverClass,
    pub lookup_ms: f64,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdnResult {
    pub cdn_name: String,
    pub url: String,
    /// 0 when no response was received.
    pub http_status: u16,
    pub total_ms: f64,
    pub bytes: u64,
    pub shield_status: CacheStatus,
    pub edge_status: CacheStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CdnResult {
    pub fn is_success(&self) -> bool {
        self.error.is_none() && (200..300).contains(&self.http_status)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WebPhase {
    Dns,
    Connect,
    FirstByte,
    Transfer,
}

/// Phase timings are cumulative from request start, in the style of
/// `curl -w`: `dns_ms <= connect_ms <= ttfb_ms <= total_ms`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WebResult {
    pub url: String,
    pub dns_ms: f64,
    pub connect_ms: f64,
    pub ttfb_ms: f64,
    pub total_ms: f64,
    pub bytes: u64,
    #[serde(default)]
    pub speed_index_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub http_status: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_phase: Option<WebPhase>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Resolution {
    #[serde(rename = "r144")]
    R144,
    #[serde(rename = "r240")]
    R240,
    #[serde(rename = "r360")]
    R360,
    #[serde(rename = "r480")]
    R480,
    #[serde(rename = "r720")]
    R720,
    #[serde(rename = "r1080")]
    R1080,
}

impl Resolution {
    pub const ALL: [Resolution; 6] = [
        Resolution::R144,
        Resolution::R240,
        Resolution::R360,
        Resolution::R480,
        Resolution::R720,
        Resolution::R1080,
    ];

    pub fn height(self) -> u32 {
        match self {
            Resolution::R144 => 144,
            Resolution::R240 => 240,
            Resolution::R360 => 360,
            Resolution::R480 => 480,
            Resolution::R720 => 720,
            Resolution::R1080 => 1080,
        }
    }

    pub fn from_height(height: u32) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.height() == height)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Resolution::R144 => "r144",
            Resolution::R240 => "r240",
            Resolution::R360 => "r360",
            Resolution::R480 => "r480",
            Resolution::R720 => "r720",
            Resolution::R1080 => "r1080",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YoutubeSample {
    pub timestamp: DateTime<Utc>,
    pub resolution: Resolution,
    pub buffer_health_s: f64,
    pub dropped_frames: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct YoutubeStatSeries {
    pub samples: Vec<YoutubeSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    Speedtest(SpeedtestResult),
    Latency(LatencyResult),
    Dns(DnsResult),
    Cdn(CdnResult),
    Web(WebResult),
    Youtube(YoutubeStatSeries),
}

impl Payload {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Payload::Speedtest(_) => ExperimentKind::Speedtest,
            Payload::Latency(_) => ExperimentKind::Latency,
            Payload::Dns(_) => ExperimentKind::Dns,
            Payload::Cdn(_) => ExperimentKind::Cdn,
            Payload::Web(_) => ExperimentKind::Web,
            Payload::Youtube(_) => ExperimentKind::Youtube,
        }
    }

    /// Bytes the probe moved over the network, for data-cap accounting.
    pub fn bytes_transferred(&self) -> u64 {
        match self {
            Payload::Speedtest(s) => s.bytes_down + s.bytes_up,
            Payload::Cdn(c) => c.bytes,
            Payload::Web(w) => w.bytes,
            // DNS and hop probes are a few hundred bytes at most; the ledger
            // only counts bulk transfers.
            Payload::Latency(_) | Payload::Dns(_) | Payload::Youtube(_) => 0,
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        match self {
            Payload::Speedtest(s) => validate_speedtest(s),
            Payload::Latency(l) => validate_latency(l),
            Payload::Dns(d) => {
                non_negative("lookup_ms", d.lookup_ms)?;
                let class = classify_resolver(&d.resolver_ip)
                    .map_err(|e| ValidationError::new("resolver_ip", e.to_string()))?;
                if class != d.resolver_class {
                    return Err(ValidationError::new(
                        "resolver_class",
                        format!("{} does not match resolver {}", d.resolver_class, d.resolver_ip),
                    ));
                }
                Ok(())
            }
            Payload::Cdn(c) => non_negative("total_ms", c.total_ms),
            Payload::Web(w) => {
                for (name, v) in [
                    ("dns_ms", w.dns_ms),
                    ("connect_ms", w.connect_ms),
                    ("ttfb_ms", w.ttfb_ms),
                    ("total_ms", w.total_ms),
                ] {
                    non_negative(name, v)?;
                }
                if w.failed_phase.is_none() && (w.dns_ms > w.total_ms || w.ttfb_ms > w.total_ms) {
                    return Err(ValidationError::new("total_ms", "phase exceeds total"));
                }
                if let Some(si) = w.speed_index_s {
                    non_negative("speed_index_s", si)?;
                }
                Ok(())
            }
            Payload::Youtube(y) => {
                for pair in y.samples.windows(2) {
                    if pair[1].timestamp < pair[0].timestamp {
                        return Err(ValidationError::new(
                            "samples",
                            "timestamps must be non-decreasing",
                        ));
                    }
                }
                for s in &y.samples {
                    non_negative("buffer_health_s", s.buffer_health_s)?;
                }
                Ok(())
            }
        }
    }
}

fn non_negative(field: &str, v: f64) -> Result<(), ValidationError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ValidationError::new(field, format!("{v} is not a non-negative number")))
    }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-9
}

fn validate_speedtest(s: &SpeedtestResult) -> Result<(), ValidationError> {
    non_negative("down_mbps", s.down_mbps)?;
    non_negative("up_mbps", s.up_mbps)?;
    non_negative("duration_s", s.duration_s)?;
    if s.duration_s > 0.0 {
        for (field, mbps, bytes) in [
            ("down_mbps", s.down_mbps, s.bytes_down),
            ("up_mbps", s.up_mbps, s.bytes_up),
        ] {
            let expected = compute_throughput_mbps(bytes, s.duration_s);
            if !close(mbps, expected, 0.01) {
                return Err(ValidationError::new(
                    field,
                    format!("{mbps} inconsistent with {bytes} bytes over {}s", s.duration_s),
                ));
            }
        }
    }
    Ok(())
}

fn validate_latency(l: &LatencyResult) -> Result<(), ValidationError> {
    if l.hop_count as usize != l.hops.len() {
        return Err(ValidationError::new("hop_count", "must equal the number of hops"));
    }
    let last = l.hops.last().map_or(0.0, |h| h.avg_rtt_ms);
    if last != l.final_avg_rtt_ms {
        return Err(ValidationError::new(
            "final_avg_rtt_ms",
            "must equal the last hop's average RTT",
        ));
    }
    for (i, hop) in l.hops.iter().enumerate() {
        if hop.hop_index as usize != i + 1 {
            return Err(ValidationError::new("hops", "hop_index must be 1-based and ordered"));
        }
        if hop.lost > hop.sent {
            return Err(ValidationError::new("hops.lost", "lost exceeds sent"));
        }
        non_negative("hops.avg_rtt_ms", hop.avg_rtt_ms)?;
        if hop.sent > hop.lost {
            let eps = 1e-9 * hop.worst_rtt_ms.abs().max(1.0);
            if hop.best_rtt_ms > hop.avg_rtt_ms + eps || hop.avg_rtt_ms > hop.worst_rtt_ms + eps {
                return Err(ValidationError::new("hops", "need best <= avg <= worst"));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub record_id: RecordId,
    pub device_id: String,
    pub network_id: String,
    pub experiment_kind: ExperimentKind,
    pub timestamp: DateTime<Utc>,
    pub payload: Payload,
}

impl MeasurementRecord {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.device_id.trim().is_empty() {
            return Err(ValidationError::new("device_id", "must not be empty"));
        }
        self.record_id.as_str().parse::<RecordId>()?;
        if self.payload.kind() != self.experiment_kind {
            return Err(ValidationError::new(
                "payload",
                format!(
                    "{} payload does not match experiment_kind {}",
                    self.payload.kind(),
                    self.experiment_kind
                ),
            ));
        }
        self.payload.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{rngs::StdRng, SeedableRng};

    fn hop(i: u32, avg: f64) -> HopStat {
        HopStat {
            hop_index: i,
            address: format!("10.0.0.{i}"),
            sent: 3,
            lost: 0,
            avg_rtt_ms: avg,
            best_rtt_ms: avg - 1.0,
            worst_rtt_ms: avg + 1.0,
        }
    }

    fn record(payload: Payload) -> MeasurementRecord {
        MeasurementRecord {
            record_id: RecordId::random(&mut StdRng::seed_from_u64(1)),
            device_id: "me-01".into(),
            network_id: "net-a".into(),
            experiment_kind: payload.kind(),
            timestamp: "2024-05-01T12:00:00Z".parse().unwrap(),
            payload,
        }
    }

    #[test]
    fn record_ids_are_128_bit_hex() {
        let mut rng = StdRng::seed_from_u64(7);
        let a = RecordId::random(&mut rng);
        let b = RecordId::random(&mut rng);
        assert_eq!(a.as_str().len(), 32);
        assert!(a.as_str().bytes().all(|c| c.is_ascii_hexdigit()));
        assert_ne!(a, b);
        assert!("".parse::<RecordId>().is_err());
        assert!("has space".parse::<RecordId>().is_err());
    }

    #[test]
    fn throughput_formula() {
        assert_eq!(compute_throughput_mbps(37_500_000, 10.0), 30.0);
        assert_eq!(compute_throughput_mbps(0, 10.0), 0.0);
        assert_eq!(compute_throughput_mbps(10, 0.0), 0.0);
    }

    #[test]
    fn payload_kind_mismatch_is_rejected() {
        let mut r = record(Payload::Latency(LatencyResult::from_hops(
            "t",
            vec![hop(1, 10.0), hop(2, 25.0)],
            true,
        )));
        assert!(r.validate().is_ok());
        r.experiment_kind = ExperimentKind::Dns;
        assert_eq!(r.validate().unwrap_err().field, "payload");
    }

    #[test]
    fn latency_invariants() {
        let mut l = LatencyResult::from_hops("t", vec![hop(1, 10.0), hop(2, 25.0)], true);
        assert_eq!(l.hop_count, 2);
        assert_eq!(l.final_avg_rtt_ms, 25.0);
        l.hop_count = 3;
        assert!(Payload::Latency(l.clone()).validate().is_err());
        l.hop_count = 2;
        l.hops[1].lost = 4;
        assert!(Payload::Latency(l).validate().is_err());
    }

    #[test]
    fn speedtest_rates_must_match_bytes() {
        let mut s = SpeedtestResult {
            down_mbps: 30.0,
            up_mbps: 15.0,
            bytes_down: 37_500_000,
            bytes_up: 18_750_000,
            duration_s: 10.0,
            flagged: false,
            error: None,
        };
        assert!(Payload::Speedtest(s.clone()).validate().is_ok());
        s.down_mbps = 31.0;
        assert!(Payload::Speedtest(s).validate().is_err());
    }

    #[test]
    fn dns_class_must_match_address() {
        let mut d = DnsResult {
            domain: "example.com".into(),
            resolver_ip: "8.8.8.8".into(),
            resolver_class: ResolverClass::OperatorLocal,
            lookup_ms: 12.0,
            success: true,
            answer: Some("1.2.3.4".into()),
            error: None,
        };
        assert!(Payload::Dns(d.clone()).validate().is_err());
        d.resolver_class = ResolverClass::GoogleDns;
        assert!(Payload::Dns(d).validate().is_ok());
    }

    #[test]
    fn youtube_timestamps_non_decreasing() {
        let s = |t: &str| YoutubeSample {
            timestamp: t.parse().unwrap(),
            resolution: Resolution::R720,
            buffer_health_s: 10.0,
            dropped_frames: 0,
        };
        let ok = YoutubeStatSeries {
            samples: vec![s("2024-01-01T00:00:00Z"), s("2024-01-01T00:00:01Z")],
        };
        assert!(Payload::Youtube(ok).validate().is_ok());
        let bad = YoutubeStatSeries {
            samples: vec![s("2024-01-01T00:00:01Z"), s("2024-01-01T00:00:00Z")],
        };
        assert!(Payload::Youtube(bad).validate().is_err());
    }

    #[test]
    fn record_wire_format() {
        let r = record(Payload::Cdn(CdnResult {
            cdn_name: "cloudflare".into(),
            url: "http://127.0.0.1/jquery.min.js".into(),
            http_status: 200,
            total_ms: 35.5,
            bytes: 87_000,
            shield_status: CacheStatus::Unknown,
            edge_status: CacheStatus::Hit,
            error: None,
        }));
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["experiment_kind"], "cdn");
        assert_eq!(v["payload"]["type"], "cdn");
        assert_eq!(v["payload"]["edge_status"], "hit");
        assert_eq!(v["timestamp"], "2024-05-01T12:00:00Z");
    }
}
