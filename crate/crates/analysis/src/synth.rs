//! Builders for hand-made datasets: tests, examples and constructed-input
//! checks of the report pipeline.

use amigo_core::{
    classify_resolver, CacheStatus, CdnResult, Continent, DnsResult, ExperimentKind, HopStat,
    LatencyResult, MeasurementRecord, NetworkInfo, NetworkRegistry, Payload, Resolution,
    SpeedtestResult, WebResult, YoutubeSample, YoutubeStatSeries,
};
use chrono::{DateTime, Duration, Utc};

/// Hands out sequential record ids and timestamps so built datasets are
/// reproducible.
#[derive(Debug, Clone)]
pub struct RecordFactory {
    next: u64,
    start: DateTime<Utc>,
}

impl Default for RecordFactory {
    fn default() -> Self {
        Self::new()
    }
}

impl RecordFactory {
    pub fn new() -> Self {
        Self {
            next: 0,
            start: DateTime::from_timestamp(1_700_000_000, 0).expect("valid timestamp"),
        }
    }

    pub fn record(&mut self, network_id: &str, payload: Payload) -> MeasurementRecord {
        let n = self.next;
        self.next += 1;
        MeasurementRecord {
            record_id: format!("{n:032x}").parse().expect("hex ids are valid"),
            device_id: format!("dev-{network_id}"),
            network_id: network_id.to_string(),
            experiment_kind: payload.kind(),
            timestamp: self.start + Duration::seconds(n as i64),
            payload,
        }
    }

    pub fn speedtest(&mut self, network_id: &str, down_mbps: f64, up_mbps: f64) -> MeasurementRecord {
        let duration_s = 10.0;
        let bytes = |mbps: f64| (mbps * 1e6 / 8.0 * duration_s) as u64;
        self.record(
            network_id,
            Payload::Speedtest(SpeedtestResult {
                down_mbps,
                up_mbps,
                bytes_down: bytes(down_mbps),
                bytes_up: bytes(up_mbps),
                duration_s,
                flagged: false,
                error: None,
            }),
        )
    }

    /// A complete single-hop trace with the given round-trip time.
    pub fn latency(&mut self, network_id: &str, rtt_ms: f64) -> MeasurementRecord {
        let hop = HopStat {
            hop_index: 1,
            address: "192.0.2.1".into(),
            sent: 10,
            lost: 0,
            avg_rtt_ms: rtt_ms,
            best_rtt_ms: rtt_ms,
            worst_rtt_ms: rtt_ms,
        };
        self.record(
            network_id,
            Payload::Latency(LatencyResult::from_hops("192.0.2.1", vec![hop], true)),
        )
    }

    pub fn dns(&mut self, network_id: &str, resolver_ip: &str, lookup_ms: f64) -> MeasurementRecord {
        self.record(
            network_id,
            Payload::Dns(DnsResult {
                domain: "example.com".into(),
                resolver_ip: resolver_ip.into(),
                resolver_class: classify_resolver(resolver_ip).expect("resolver must be IPv4"),
                lookup_ms,
                success: true,
                answer: Some("192.0.2.10".into()),
                error: None,
            }),
        )
    }

    pub fn cdn(&mut self, network_id: &str, cdn: &str, edge: CacheStatus, total_ms: f64) -> MeasurementRecord {
        self.record(
            network_id,
            Payload::Cdn(CdnResult {
                cdn_name: cdn.into(),
                url: format!("https://{cdn}.example/lib.js"),
                http_status: 200,
                total_ms,
                bytes: 100_000,
                shield_status: CacheStatus::Unknown,
                edge_status: edge,
                error: None,
            }),
        )
    }

    pub fn web(&mut self, network_id: &str, speed_index_s: f64) -> MeasurementRecord {
        self.record(
            network_id,
            Payload::Web(WebResult {
                url: "https://www.example.com/".into(),
                dns_ms: 20.0,
                connect_ms: 60.0,
                ttfb_ms: 200.0,
                total_ms: speed_index_s * 1000.0,
                bytes: 500_000,
                speed_index_s: Some(speed_index_s),
                http_status: Some(200),
                failed_phase: None,
            }),
        )
    }

    /// One player session; samples are one second apart.
    pub fn youtube(&mut self, network_id: &str, resolutions: &[Resolution]) -> MeasurementRecord {
        let start = self.start + Duration::seconds(self.next as i64);
        let samples = resolutions
            .iter()
            .enumerate()
            .map(|(i, r)| YoutubeSample {
                timestamp: start + Duration::seconds(i as i64),
                resolution: *r,
                buffer_health_s: 10.0,
                dropped_frames: 0,
            })
            .collect();
        let record = self.record(network_id, Payload::Youtube(YoutubeStatSeries { samples }));
        debug_assert_eq!(record.experiment_kind, ExperimentKind::Youtube);
        record
    }
}

/// Registry from `(network_id, operator, continent)` triples.
pub fn registry(entries: &[(&str, &str, Continent)]) -> NetworkRegistry {
    let mut reg = NetworkRegistry::new();
    for (id, operator, continent) in entries {
        reg.insert(
            *id,
            NetworkInfo {
                operator_name: operator.to_string(),
                country: "XX".into(),
                continent: *continent,
            },
        )
        .expect("network ids are unique");
    }
    reg
}
