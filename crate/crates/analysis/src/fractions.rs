use std::collections::BTreeMap;

use amigo_core::{
    classify_latency, classify_speed, classify_speed_index, LatencyClass, MeasurementRecord,
    Payload, SpeedClass, SpeedIndexClass,
};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;

/// A metric together with the class a test must fall in to count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "metric", content = "class", rename_all = "snake_case")]
pub enum ClassSelector {
    Download(SpeedClass),
    Upload(SpeedClass),
    Latency(LatencyClass),
    SpeedIndex(SpeedIndexClass),
}

impl ClassSelector {
    /// Every metric/class pair, in report order.
    pub fn all() -> Vec<ClassSelector> {
        let mut out = Vec::new();
        out.extend(SpeedClass::ALL.iter().map(|c| ClassSelector::Download(*c)));
        out.extend(SpeedClass::ALL.iter().map(|c| ClassSelector::Upload(*c)));
        out.extend(LatencyClass::ALL.iter().map(|c| ClassSelector::Latency(*c)));
        out.extend(SpeedIndexClass::ALL.iter().map(|c| ClassSelector::SpeedIndex(*c)));
        out
    }

    pub fn metric(self) -> &'static str {
        match self {
            ClassSelector::Download(_) => "download",
            ClassSelector::Upload(_) => "upload",
            ClassSelector::Latency(_) => "latency",
            ClassSelector::SpeedIndex(_) => "speed_index",
        }
    }

    pub fn class_name(self) -> &'static str {
        match self {
            ClassSelector::Download(c) | ClassSelector::Upload(c) => c.as_str(),
            ClassSelector::Latency(c) => c.as_str(),
            ClassSelector::SpeedIndex(c) => c.as_str(),
        }
    }

    /// `None` when the record does not carry this metric: other kinds,
    /// failed speed tests, incomplete traces and pages without a speed index.
    pub fn test(self, record: &MeasurementRecord) -> Option<bool> {
        match (self, &record.payload) {
            (ClassSelector::Download(c), Payload::Speedtest(s)) if s.error.is_none() => {
                classify_speed(s.down_mbps).ok().map(|got| got == c)
            }
            (ClassSelector::Upload(c), Payload::Speedtest(s)) if s.error.is_none() => {
                classify_speed(s.up_mbps).ok().map(|got| got == c)
            }
            (ClassSelector::Latency(c), Payload::Latency(l)) if l.complete && l.hop_count > 0 => {
                classify_latency(l.final_avg_rtt_ms).ok().map(|got| got == c)
            }
            (ClassSelector::SpeedIndex(c), Payload::Web(w)) => w
                .speed_index_s
                .and_then(|si| classify_speed_index(si).ok())
                .map(|got| got == c),
            _ => None,
        }
    }
}

/// Per network, the share of applicable tests that land in the selected
/// class. Networks without an applicable test are left out.
pub fn per_network_fraction(ds: &Dataset, selector: ClassSelector) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for r in &ds.records {
        if let Some(hit) = selector.test(r) {
            let e = counts.entry(r.network_id.as_str()).or_default();
            e.1 += 1;
            if hit {
                e.0 += 1;
            }
        }
    }
    counts
        .into_iter()
        .map(|(id, (hit, total))| (id.to_string(), hit as f64 / total as f64))
        .collect()
}
