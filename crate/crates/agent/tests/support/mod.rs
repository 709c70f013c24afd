#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use amigo_agent::{ProbeRunner, SensorReading, Timeline, TimelineStep};
use amigo_core::{
    Connectivity, DnsResult, ExperimentKind, ExperimentSpec, Payload, ResolverClass, ScheduleRule,
    SpeedtestResult, GIB,
};
use chrono::{DateTime, Datelike, Duration, TimeZone, Utc};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 3, 1, 0, 0, 0).unwrap()
}

/// Random-walk battery and a connectivity mix, one step every 20 minutes.
pub fn random_timeline(seed: u64, days: i64) -> Timeline {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut battery: i32 = 70;
    let mut steps = Vec::new();
    let mut at = 0;
    while at < days * 86_400 {
        battery = (battery + rng.random_range(-12..=12)).clamp(0, 100);
        let connectivity = match rng.random_range(0..10) {
            0..=5 => Connectivity::Mobile,
            6 => Connectivity::Wifi,
            7 => Connectivity::Both,
            _ => Connectivity::None,
        };
        let sensor_glitch = rng.random_range(0..25) == 0;
        steps.push(TimelineStep {
            at_s: at,
            reading: SensorReading {
                battery_pct: (!sensor_glitch).then_some(battery as u8),
                connectivity: Some(connectivity),
                operator_name: Some("Digicel".into()),
                network_id: Some("digicel-jm".into()),
                gps: None,
            },
        });
        at += 20 * 60;
    }
    Timeline::new(t0(), steps)
}

pub fn spec(id: &str, kind: ExperimentKind, params: &[(&str, &str)]) -> ExperimentSpec {
    ExperimentSpec {
        id: id.into(),
        kind,
        params: params.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        schedule: ScheduleRule::default(),
    }
}

/// Calls seen by [`RecordingProbes`]: (instant, experiment id, bytes).
pub type CallLog = Arc<Mutex<Vec<(DateTime<Utc>, String, u64)>>>;

/// Deterministic stand-in probes; speedtests move `speed_bytes`.
pub struct RecordingProbes {
    pub calls: CallLog,
    pub speed_bytes: u64,
}

impl RecordingProbes {
    pub fn new(speed_bytes: u64) -> (Self, CallLog) {
        let calls = CallLog::default();
        (Self { calls: calls.clone(), speed_bytes }, calls)
    }
}

impl ProbeRunner for RecordingProbes {
    fn run(&mut self, spec: &ExperimentSpec, target: Option<&str>, now: DateTime<Utc>) -> Payload {
        let payload = match spec.kind {
            ExperimentKind::Speedtest => {
                let half = self.speed_bytes / 2;
                Payload::Speedtest(SpeedtestResult {
                    down_mbps: half as f64 * 8.0 / 10.0 / 1e6,
                    up_mbps: (self.speed_bytes - half) as f64 * 8.0 / 10.0 / 1e6,
                    bytes_down: half,
                    bytes_up: self.speed_bytes - half,
                    duration_s: 10.0,
                    flagged: false,
                    error: None,
                })
            }
            _ => Payload::Dns(DnsResult {
                domain: target.unwrap_or("").into(),
                resolver_ip: "8.8.8.8".into(),
                resolver_class: ResolverClass::GoogleDns,
                lookup_ms: 30.0,
                success: true,
                answer: Some("192.0.2.1".into()),
                error: None,
            }),
        };
        self.calls
            .lock()
            .unwrap()
            .push((now, spec.id.clone(), payload.bytes_transferred()));
        payload
    }
}

/// Pause windows as the test issued them, cut short by the 03:00 UTC reset.
pub fn pause_windows(issued: &[(DateTime<Utc>, i64)]) -> Vec<(DateTime<Utc>, DateTime<Utc>)> {
    issued
        .iter()
        .map(|(at, secs)| {
            let end = *at + Duration::seconds(*secs);
            let mut reset = Utc
                .with_ymd_and_hms(at.year(), at.month(), at.day(), 3, 0, 0)
                .unwrap();
            if reset <= *at {
                reset += Duration::days(1);
            }
            (*at, end.min(reset))
        })
        .collect()
}

/// Checks every execution against the policy using only the timeline, the
/// issued pauses and the call log. Returns violation descriptions.
pub fn audit(
    calls: &[(DateTime<Utc>, String, u64)],
    timeline: &Timeline,
    pauses: &[(DateTime<Utc>, DateTime<Utc>)],
    interval: Duration,
    floor: u8,
    cap: u64,
) -> Vec<String> {
    let mut violations = Vec::new();
    let mut last: BTreeMap<&str, DateTime<Utc>> = BTreeMap::new();
    let mut ledger: BTreeMap<chrono::NaiveDate, u64> = BTreeMap::new();
    let mut prev_call: Option<(DateTime<Utc>, &str)> = None;
    for (at, id, bytes) in calls {
        // Several targets of one run share an instant; audit the run once.
        let same_run = prev_call == Some((*at, id.as_str()));
        prev_call = Some((*at, id.as_str()));
        if !same_run {
            let r = timeline.at(*at);
            if r.battery_pct.is_none_or(|b| b < floor) {
                violations.push(format!("{at} {id}: battery {:?}", r.battery_pct));
            }
            if r.connectivity != Some(Connectivity::Mobile) {
                violations.push(format!("{at} {id}: connectivity {:?}", r.connectivity));
            }
            if let Some(p) = last.get(id.as_str()) {
                if *at - *p < interval {
                    violations.push(format!("{at} {id}: only {} since last run", *at - *p));
                }
            }
            if pauses.iter().any(|(s, e)| s <= at && at < e) {
                violations.push(format!("{at} {id}: ran while paused"));
            }
            let used = ledger.get(&at.date_naive()).copied().unwrap_or(0);
            if used >= cap {
                violations.push(format!("{at} {id}: ledger {used} at cap"));
            }
            last.insert(id, *at);
        }
        *ledger.entry(at.date_naive()).or_default() += bytes;
    }
    violations
}

pub fn cap_bytes() -> u64 {
    4 * GIB
}
