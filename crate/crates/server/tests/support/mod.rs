#![allow(dead_code)]

use amigo_core::{
    Connectivity, DeviceStatus, DnsResult, ExperimentKind, MeasurementRecord, Payload, RecordId,
    ResolverClass,
};
use chrono::{DateTime, Utc};

pub fn t0() -> DateTime<Utc> {
    "2024-03-01T10:00:00Z".parse().unwrap()
}

pub fn status(device: &str, data_used_today: u64) -> DeviceStatus {
    DeviceStatus {
        device_id: device.into(),
        timestamp: t0(),
        battery_pct: Some(80),
        connectivity: Connectivity::Mobile,
        operator_name: "Digicel".into(),
        network_id: "digicel-jm".into(),
        gps: None,
        data_used_today,
        agent_version: "test".into(),
    }
}

pub fn dns_record(device: &str, id: &str) -> MeasurementRecord {
    MeasurementRecord {
        record_id: id.parse::<RecordId>().unwrap(),
        device_id: device.into(),
        network_id: "digicel-jm".into(),
        experiment_kind: ExperimentKind::Dns,
        timestamp: t0(),
        payload: Payload::Dns(DnsResult {
            domain: "example.com".into(),
            resolver_ip: "8.8.8.8".into(),
            resolver_class: ResolverClass::GoogleDns,
            lookup_ms: 42.0,
            success: true,
            answer: Some("93.184.216.34".into()),
            error: None,
        }),
    }
}
