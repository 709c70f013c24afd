//! Turning experiment specs into probe calls.

use std::net::SocketAddr;
use std::time::Duration;

use amigo_core::{
    classify_resolver, CacheStatus, CdnResult, DnsResult, ExperimentKind, ExperimentSpec, LatencyResult,
    Payload, ResolverClass, SpeedtestResult, YoutubeStatSeries,
};
use amigo_probes::{probe_cdn, probe_dns, probe_latency, probe_web, run_speedtest, Resolver};
use chrono::{DateTime, Utc};

pub trait ProbeRunner: Send {
    /// Runs the experiment against one target (`None` for untargeted kinds)
    /// and always returns a payload; failures are encoded in it.
    fn run(&mut self, spec: &ExperimentSpec, target: Option<&str>, now: DateTime<Utc>) -> Payload;
}

/// Splits a CDN target `name=url`; a bare URL is named after its host.
pub fn cdn_target(target: &str) -> (String, String) {
    match target.split_once('=') {
        Some((name, url)) if !name.contains('/') => (name.trim().to_string(), url.trim().to_string()),
        _ => {
            let host = url::Url::parse(target)
                .ok()
                .and_then(|u| u.host_str().map(str::to_string))
                .unwrap_or_else(|| target.to_string());
            (host, target.to_string())
        }
    }
}

/// Probes the real network (or a simnet) using the experiment spec parameters:
///
/// | kind | params |
/// |---|---|
/// | speedtest | `server` (throughput service), `duration_s` (10) |
/// | latency | `server` (hop service), `targets`, `probes_per_hop` (3), `max_hops` (30) |
/// | dns | `targets`, `resolver` (`8.8.8.8:53`) |
/// | cdn | `targets` as `name=url`, optional `resolver` |
/// | web | `targets` as URLs, optional `resolver` |
#[derive(Debug, Clone)]
pub struct LiveProbes {
    pub timeout: Duration,
}

impl Default for LiveProbes {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(10),
        }
    }
}

fn addr_param(spec: &ExperimentSpec, key: &str) -> Result<Option<SocketAddr>, String> {
    spec.param(key)
        .map(|raw| raw.trim().parse().map_err(|_| format!("params.{key}: bad address {raw:?}")))
        .transpose()
}

impl LiveProbes {
    fn resolver(&self, spec: &ExperimentSpec) -> Result<Resolver, String> {
        Ok(match addr_param(spec, "resolver")? {
            Some(server) => Resolver::Dns {
                server,
                timeout: self.timeout,
            },
            None => Resolver::System,
        })
    }
}

impl ProbeRunner for LiveProbes {
    fn run(&mut self, spec: &ExperimentSpec, target: Option<&str>, _now: DateTime<Utc>) -> Payload {
        let target = target.unwrap_or("");
        match spec.kind {
            ExperimentKind::Speedtest => {
                let duration_s = spec.param_or("duration_s", 10.0f64).unwrap_or(10.0).max(0.1);
                let failed = |error: String| SpeedtestResult {
                    down_mbps: 0.0,
                    up_mbps: 0.0,
                    bytes_down: 0,
                    bytes_up: 0,
                    duration_s,
                    flagged: true,
                    error: Some(error),
                };
                Payload::Speedtest(match addr_param(spec, "server") {
                    Ok(Some(server)) => run_speedtest(server, Duration::from_secs_f64(duration_s), self.timeout),
                    Ok(None) => failed("no server configured".into()),
                    Err(e) => failed(e),
                })
            }
            ExperimentKind::Latency => {
                let probes = spec.param_or("probes_per_hop", 3u32).unwrap_or(3);
                let max_hops = spec.param_or("max_hops", 30u32).unwrap_or(30);
                let result = addr_param(spec, "server")
                    .and_then(|s| s.ok_or_else(|| "no hop server configured".to_string()))
                    .and_then(|server| {
                        probe_latency(server, target, max_hops, probes, self.timeout).map_err(|e| e.to_string())
                    });
                Payload::Latency(result.unwrap_or_else(|e| {
                    tracing::debug!("latency probe to {target} failed: {e}");
                    LatencyResult::from_hops(target, Vec::new(), false)
                }))
            }
            ExperimentKind::Dns => {
                let resolver = match addr_param(spec, "resolver") {
                    Ok(r) => r.unwrap_or_else(|| SocketAddr::from(([8, 8, 8, 8], 53))),
                    Err(e) => return Payload::Dns(dns_failure(target, "0.0.0.0", e)),
                };
                Payload::Dns(
                    probe_dns(target, resolver, self.timeout)
                        .unwrap_or_else(|e| dns_failure(target, &resolver.ip().to_string(), e.to_string())),
                )
            }
            ExperimentKind::Cdn => {
                let (name, url) = cdn_target(target);
                match self.resolver(spec) {
                    Ok(r) => Payload::Cdn(probe_cdn(&name, &url, &r, self.timeout)),
                    Err(e) => Payload::Cdn(CdnResult {
                        cdn_name: name,
                        url,
                        http_status: 0,
                        total_ms: 0.0,
                        bytes: 0,
                        shield_status: CacheStatus::Unknown,
                        edge_status: CacheStatus::Unknown,
                        error: Some(e),
                    }),
                }
            }
            ExperimentKind::Web => {
                let resolver = self.resolver(spec).unwrap_or_default();
                Payload::Web(probe_web(target, &resolver, self.timeout))
            }
            ExperimentKind::Youtube => Payload::Youtube(YoutubeStatSeries { samples: Vec::new() }),
        }
    }
}

pub fn dns_failure(domain: &str, resolver_ip: &str, error: String) -> DnsResult {
    DnsResult {
        domain: domain.to_string(),
        resolver_ip: resolver_ip.to_string(),
        resolver_class: classify_resolver(resolver_ip).unwrap_or(ResolverClass::OperatorLocal),
        lookup_ms: 0.0,
        success: false,
        answer: None,
        error: Some(error),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdn_targets() {
        assert_eq!(
            cdn_target("fastly=http://cdn.example/jquery.min.js"),
            ("fastly".to_string(), "http://cdn.example/jquery.min.js".to_string())
        );
        assert_eq!(
            cdn_target("http://cdn.example/a?x=1").0,
            "cdn.example".to_string()
        );
    }
}
