use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use amigo_core::CacheStatus;
use serde::{Deserialize, Serialize};

use crate::scenario::Scenario;

#[derive(Debug, Default)]
pub struct ServiceCounters {
    requests: AtomicU64,
    bytes: AtomicU64,
}

impl ServiceCounters {
    pub fn request(&self) {
        self.requests.fetch_add(1, Ordering::Relaxed);
    }

    pub fn add_bytes(&self, n: u64) {
        self.bytes.fetch_add(n, Ordering::Relaxed);
    }

    fn snapshot(&self) -> ServiceSnapshot {
        ServiceSnapshot {
            requests: self.requests.load(Ordering::Relaxed),
            bytes: self.bytes.load(Ordering::Relaxed),
        }
    }
}

#[derive(Debug, Default)]
pub struct AssetCounters {
    next_index: AtomicU64,
    edge_hits: AtomicU64,
    edge_misses: AtomicU64,
    shield_hits: AtomicU64,
    shield_misses: AtomicU64,
    bytes: AtomicU64,
}

impl AssetCounters {
    /// Claims the next request index for this asset.
    pub fn next_index(&self) -> u64 {
        self.next_index.fetch_add(1, Ordering::Relaxed)
    }

    pub fn tally(&self, shield: CacheStatus, edge: CacheStatus, bytes: u64) {
        let bump = |s: CacheStatus, hit: &AtomicU64, miss: &AtomicU64| match s {
            CacheStatus::Hit => {
                hit.fetch_add(1, Ordering::Relaxed);
            }
            CacheStatus::Miss => {
                miss.fetch_add(1, Ordering::Relaxed);
            }
            CacheStatus::Unknown => {}
        };
        bump(edge, &self.edge_hits, &self.edge_misses);
        bump(shield, &self.shield_hits, &self.shield_misses);
        self.bytes.fetch_add(bytes, Ordering::Relaxed);
    }
}

/// Shared registry. Asset counters are fixed at startup from the scenario.
#[derive(Debug, Default)]
pub struct Metrics {
    pub hop: ServiceCounters,
    pub throughput_down: ServiceCounters,
    pub throughput_up: ServiceCounters,
    pub dns: ServiceCounters,
    pub http: ServiceCounters,
    assets: BTreeMap<String, AssetCounters>,
}

impl Metrics {
    pub fn for_scenario(scenario: &Scenario) -> Self {
        Self {
            assets: scenario
                .assets
                .iter()
                .map(|a| (a.path.clone(), AssetCounters::default()))
                .collect(),
            ..Self::default()
        }
    }

    pub fn asset(&self, path: &str) -> Option<&AssetCounters> {
        self.assets.get(path)
    }

    pub fn snapshot(&self) -> MetricsSnapshot {
        MetricsSnapshot {
            hop: self.hop.snapshot(),
            throughput_down: self.throughput_down.snapshot(),
            throughput_up: self.throughput_up.snapshot(),
            dns: self.dns.snapshot(),
            http: self.http.snapshot(),
            assets: self
                .assets
                .iter()
                .map(|(k, c)| {
                    (
                        k.clone(),
                        AssetSnapshot {
                            requests: c.next_index.load(Ordering::Relaxed),
                            edge_hits: c.edge_hits.load(Ordering::Relaxed),
                            edge_misses: c.edge_misses.load(Ordering::Relaxed),
                            shield_hits: c.shield_hits.load(Ordering::Relaxed),
                            shield_misses: c.shield_misses.load(Ordering::Relaxed),
                            bytes: c.bytes.load(Ordering::Relaxed),
                        },
                    )
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceSnapshot {
    pub requests: u64,
    pub bytes: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetSnapshot {
    pub requests: u64,
    pub edge_hits: u64,
    pub edge_misses: u64,
    pub shield_hits: u64,
    pub shield_misses: u64,
    pub bytes: u64,
}

/// Point-in-time copy of every counter, as served by `GET /metrics`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsSnapshot {
    pub hop: ServiceSnapshot,
    pub throughput_down: ServiceSnapshot,
    pub throughput_up: ServiceSnapshot,
    pub dns: ServiceSnapshot,
    pub http: ServiceSnapshot,
    pub assets: BTreeMap<String, AssetSnapshot>,
}
