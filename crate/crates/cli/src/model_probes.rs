//! Virtual-time probes for the demo.
//!
//! Results are computed from the scenario model (hop delays, DNS delay,
//! throughput caps, cache decisions) shaped by a per-network profile, so a
//! demo run never depends on wall-clock timing and is reproducible bit for
//! bit. Every draw is keyed on (scenario seed, device, call counter).

use std::sync::Arc;

use amigo_agent::runner::{cdn_target, dns_failure};
use amigo_agent::ProbeRunner;
use amigo_core::{
    classify_resolver, CdnResult, Continent, DnsResult, ExperimentKind, ExperimentSpec, HopStat,
    LatencyResult, Payload, SpeedtestResult, WebResult, YoutubeStatSeries,
};
use amigo_core::CacheStatus;
use amigo_simnet::model::{cache_decision, fnv1a, hop_address, hop_delay_ms, keyed_unit};
use amigo_simnet::Scenario;
use chrono::{DateTime, Utc};

/// How one simulated mobile network differs from the bare scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkProfile {
    pub network_id: &'static str,
    pub operator: &'static str,
    pub country: &'static str,
    pub continent: Continent,
    /// Typical share of the scenario's throughput cap.
    pub speed_factor: f64,
    /// Radio and backhaul delay added to every round trip.
    pub access_rtt_ms: f64,
    /// Share of lookups that go to Google's public resolver.
    pub google_dns_share: f64,
    /// Google lookups cost this many times the local ones.
    pub google_dns_penalty: f64,
}

pub const PROFILES: [NetworkProfile; 6] = [
    NetworkProfile {
        network_id: "aurora-de",
        operator: "Aurora Mobile",
        country: "DE",
        continent: Continent::Europe,
        speed_factor: 1.1,
        access_rtt_ms: 12.0,
        google_dns_share: 0.05,
        google_dns_penalty: 1.5,
    },
    NetworkProfile {
        network_id: "savanna-ke",
        operator: "Savanna Tel",
        country: "KE",
        continent: Continent::Africa,
        speed_factor: 0.35,
        access_rtt_ms: 85.0,
        google_dns_share: 0.3,
        google_dns_penalty: 4.0,
    },
    NetworkProfile {
        network_id: "lotus-in",
        operator: "Lotus Cell",
        country: "IN",
        continent: Continent::Asia,
        speed_factor: 0.55,
        access_rtt_ms: 45.0,
        google_dns_share: 0.15,
        google_dns_penalty: 2.5,
    },
    NetworkProfile {
        network_id: "andes-pe",
        operator: "Andes Movil",
        country: "PE",
        continent: Continent::CentralSouthAmerica,
        speed_factor: 0.45,
        access_rtt_ms: 60.0,
        google_dns_share: 0.4,
        google_dns_penalty: 8.0,
    },
    NetworkProfile {
        network_id: "coral-au",
        operator: "Coral Wireless",
        country: "AU",
        continent: Continent::Australia,
        speed_factor: 0.9,
        access_rtt_ms: 28.0,
        google_dns_share: 0.05,
        google_dns_penalty: 2.0,
    },
    NetworkProfile {
        network_id: "fjord-no",
        operator: "Fjord Net",
        country: "NO",
        continent: Continent::Europe,
        speed_factor: 1.3,
        access_rtt_ms: 9.0,
        google_dns_share: 0.0,
        google_dns_penalty: 1.0,
    },
];

pub struct ModelProbes {
    scenario: Arc<Scenario>,
    profile: NetworkProfile,
    device: String,
    calls: u64,
    local_resolver: String,
}

impl ModelProbes {
    pub fn new(scenario: Arc<Scenario>, profile: NetworkProfile, device: &str, index: usize) -> Self {
        Self {
            scenario,
            profile,
            device: device.to_string(),
            calls: 0,
            local_resolver: format!("10.{}.0.53", index % 250 + 1),
        }
    }

    fn draw(&self, what: &str, stream: u64) -> f64 {
        keyed_unit(self.scenario.seed, &format!("{}/{what}", self.device), self.calls, stream)
    }

    /// Access-network round trip for this call, with heavy-ish upper tail.
    fn access_rtt(&self) -> f64 {
        let u = self.draw("rtt", 0);
        self.profile.access_rtt_ms * (0.7 + 0.6 * u + 0.8 * u.powi(8))
    }

    fn rate_mbps(&self, cap: f64, stream: u64) -> f64 {
        let u = self.draw("rate", stream);
        (cap * self.profile.speed_factor * (0.45 + 0.75 * u)).clamp(0.1, cap)
    }

    fn speedtest(&self, spec: &ExperimentSpec) -> SpeedtestResult {
        let duration_s = spec.param_or("duration_s", 10.0f64).unwrap_or(10.0).max(0.1);
        let t = &self.scenario.throughput;
        let bytes = |mbps: f64| (mbps * 1e6 / 8.0 * duration_s) as u64;
        let bytes_down = bytes(self.rate_mbps(t.down_mbps, 0));
        let bytes_up = bytes(self.rate_mbps(t.up_mbps, 1));
        SpeedtestResult {
            down_mbps: amigo_core::record::compute_throughput_mbps(bytes_down, duration_s),
            up_mbps: amigo_core::record::compute_throughput_mbps(bytes_up, duration_s),
            bytes_down,
            bytes_up,
            duration_s,
            flagged: false,
            error: None,
        }
    }

    fn latency(&self, spec: &ExperimentSpec, target: &str) -> LatencyResult {
        let Some((t, tgt)) = self
            .scenario
            .targets
            .iter()
            .enumerate()
            .find(|(_, x)| x.name == target)
        else {
            return LatencyResult::from_hops(target, Vec::new(), false);
        };
        let sent = spec.param_or("probes_per_hop", 3u32).unwrap_or(3).max(1);
        let access = self.access_rtt();
        let hops = (1..=tgt.hop_cumulative_delays_ms.len() as u32)
            .map(|k| {
                let base = hop_delay_ms(&self.scenario, tgt, k, self.calls) + access;
                let spread = 1.0 + 2.0 * self.draw("spread", u64::from(k));
                HopStat {
                    hop_index: k,
                    address: hop_address(t, tgt, k),
                    sent,
                    lost: 0,
                    avg_rtt_ms: base + spread / 2.0,
                    best_rtt_ms: base,
                    worst_rtt_ms: base + spread,
                }
            })
            .collect();
        LatencyResult::from_hops(target, hops, true)
    }

    fn dns(&self, domain: &str) -> DnsResult {
        let google = self.draw("resolver", 0) < self.profile.google_dns_share;
        let resolver_ip = if google { "8.8.8.8" } else { self.local_resolver.as_str() };
        let dns = &self.scenario.dns;
        if dns.fail_domains.iter().any(|d| d == domain) {
            return dns_failure(domain, resolver_ip, "server failure".into());
        }
        let Some(answer) = dns.records.get(domain) else {
            return dns_failure(domain, resolver_ip, "no such name".into());
        };
        let mut lookup_ms = dns.delay_ms + self.access_rtt();
        if google {
            lookup_ms *= self.profile.google_dns_penalty;
        }
        DnsResult {
            domain: domain.to_string(),
            resolver_ip: resolver_ip.to_string(),
            resolver_class: classify_resolver(resolver_ip).expect("resolver addresses are IPv4"),
            lookup_ms,
            success: true,
            answer: Some(answer.clone()),
            error: None,
        }
    }

    fn transfer_ms(&self, bytes: u64) -> f64 {
        let mbps = self.rate_mbps(self.scenario.throughput.down_mbps, 2);
        bytes as f64 * 8.0 / (mbps * 1e3)
    }

    fn cdn(&self, target: &str) -> CdnResult {
        let (cdn_name, url) = cdn_target(target);
        let path = url_path(&url);
        let Some(asset) = self.scenario.asset(path) else {
            return CdnResult {
                cdn_name,
                url,
                http_status: 404,
                total_ms: 2.0 * self.access_rtt(),
                bytes: 0,
                shield_status: CacheStatus::Unknown,
                edge_status: CacheStatus::Unknown,
                error: None,
            };
        };
        let seed = self.scenario.seed ^ fnv1a(self.device.as_bytes());
        let decision = cache_decision(asset, self.calls, seed);
        let rtt = self.access_rtt();
        // connect + request, then the body; a miss adds the fetch from origin
        let mut total_ms = 2.0 * rtt + asset.think_time_ms + self.transfer_ms(asset.bytes);
        if decision.edge == CacheStatus::Miss {
            total_ms += 2.0 * rtt + 60.0 + asset.think_time_ms;
        }
        CdnResult {
            cdn_name,
            url,
            http_status: 200,
            total_ms,
            bytes: asset.bytes,
            shield_status: decision.shield,
            edge_status: decision.edge,
            error: None,
        }
    }

    fn web(&self, url: &str) -> WebResult {
        let rtt = self.access_rtt();
        let dns_ms = self.scenario.dns.delay_ms + rtt;
        let connect_ms = dns_ms + rtt;
        let Some(asset) = self.scenario.asset(url_path(url)) else {
            return WebResult {
                url: url.to_string(),
                dns_ms,
                connect_ms,
                ttfb_ms: connect_ms + rtt,
                total_ms: connect_ms + rtt,
                bytes: 0,
                speed_index_s: None,
                http_status: Some(404),
                failed_phase: None,
            };
        };
        let ttfb_ms = connect_ms + rtt + asset.think_time_ms;
        let total_ms = ttfb_ms + self.transfer_ms(asset.bytes);
        // rendering of dependent resources stretches visual completeness
        let render = 1.2 + 2.5 * self.draw("render", 0);
        WebResult {
            url: url.to_string(),
            dns_ms,
            connect_ms,
            ttfb_ms,
            total_ms,
            bytes: asset.bytes,
            speed_index_s: Some(total_ms / 1000.0 * render + 1.0),
            http_status: Some(200),
            failed_phase: None,
        }
    }
}

fn url_path(url: &str) -> &str {
    let rest = url.split_once("://").map_or(url, |(_, r)| r);
    rest.find('/').map_or("/", |i| &rest[i..])
}

impl ProbeRunner for ModelProbes {
    fn run(&mut self, spec: &ExperimentSpec, target: Option<&str>, _now: DateTime<Utc>) -> Payload {
        self.calls += 1;
        let target = target.unwrap_or("");
        match spec.kind {
            ExperimentKind::Speedtest => Payload::Speedtest(self.speedtest(spec)),
            ExperimentKind::Latency => Payload::Latency(self.latency(spec, target)),
            ExperimentKind::Dns => Payload::Dns(self.dns(target)),
            ExperimentKind::Cdn => Payload::Cdn(self.cdn(target)),
            ExperimentKind::Web => Payload::Web(self.web(target)),
            ExperimentKind::Youtube => Payload::Youtube(YoutubeStatSeries::default()),
        }
    }
}
