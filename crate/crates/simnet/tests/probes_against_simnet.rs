use std::net::TcpListener;
use std::time::Duration;

use amigo_core::CacheStatus;
use amigo_probes::{probe_cdn, probe_dns, probe_latency, probe_speed, probe_web, Direction, Resolver};
use amigo_simnet::{cache_decision, BackgroundSimnet, BindPlan, Scenario, SimnetError};

const SCENARIO: &str = r#"
seed = 11

[[targets]]
name = "google"
hop_cumulative_delays_ms = [10, 25, 60]

[dns]
delay_ms = 40
records = { "cdn.example" = "127.0.0.1", "www.example" = "127.0.0.1" }
fail_domains = ["broken.example"]

[throughput]
down_mbps = 30
up_mbps = 15

[[assets]]
path = "/jquery.min.js"
bytes = 30000
cache_policy = { mode = "hit_ratio", hit_ratio = 0.5, header_style = "x_cache_dual" }

[[assets]]
path = "/index.html"
bytes = 5000
think_time_ms = 50
cache_policy = { mode = "always_miss", header_style = "cf" }
"#;

fn start() -> BackgroundSimnet {
    let s = Scenario::from_toml(SCENARIO).unwrap();
    s.validate().unwrap();
    BackgroundSimnet::start(s, BindPlan::localhost_ephemeral()).unwrap()
}

const T: Duration = Duration::from_secs(5);

#[test]
fn hop_path_reaches_terminal_with_configured_delay() {
    let sim = start();
    let r = probe_latency(sim.addrs().hop, "google", 30, 3, T).unwrap();
    assert!(r.complete);
    assert_eq!(r.hop_count, 3);
    assert!((60.0..=75.0).contains(&r.final_avg_rtt_ms), "{}", r.final_avg_rtt_ms);
    let avgs: Vec<f64> = r.hops.iter().map(|h| h.avg_rtt_ms).collect();
    assert!(avgs.windows(2).all(|w| w[0] <= w[1]), "{avgs:?}");
    assert!(avgs[0] >= 10.0 && avgs[1] >= 25.0);
    assert_eq!(r.hops[2].address, "google");

    let unknown = probe_latency(sim.addrs().hop, "nowhere", 30, 1, T).unwrap();
    assert!(!unknown.complete);
}

#[test]
fn dns_answers_after_configured_delay() {
    let sim = start();
    let r = probe_dns("cdn.example", sim.addrs().dns, T).unwrap();
    assert!(r.success);
    assert_eq!(r.answer.as_deref(), Some("127.0.0.1"));
    assert!((40.0..=60.0).contains(&r.lookup_ms), "{}", r.lookup_ms);

    for bad in ["broken.example", "missing.example"] {
        let r = probe_dns(bad, sim.addrs().dns, T).unwrap();
        assert!(!r.success, "{bad}");
    }
    assert_eq!(sim.metrics().dns.requests, 3);
}

#[test]
fn throughput_respects_caps_and_bytes_are_conserved() {
    let sim = start();
    let d = Duration::from_secs(3);
    let down = probe_speed(sim.addrs().throughput, Direction::Down, d, T).unwrap();
    assert!((27.0..=33.0).contains(&down.mbps), "down {}", down.mbps);
    let up = probe_speed(sim.addrs().throughput, Direction::Up, d, T).unwrap();
    assert!((13.5..=16.5).contains(&up.mbps), "up {}", up.mbps);

    let m = sim.metrics();
    let close = |a: u64, b: u64| (a as f64 - b as f64).abs() <= 0.01 * b as f64;
    assert!(close(m.throughput_down.bytes, down.bytes), "{} vs {}", m.throughput_down.bytes, down.bytes);
    assert!(close(m.throughput_up.bytes, up.bytes));
}

#[test]
fn cdn_tallies_follow_the_keyed_draws() {
    let sim = start();
    let scenario = Scenario::from_toml(SCENARIO).unwrap();
    let asset = scenario.asset("/jquery.min.js").unwrap();
    let resolver = Resolver::Dns { server: sim.addrs().dns, timeout: T };
    let url = format!("http://cdn.example:{}/jquery.min.js", sim.addrs().http.port());
    let mut served = 0;
    for i in 0..20 {
        let r = probe_cdn("fastly", &url, &resolver, T);
        assert_eq!(r.http_status, 200);
        assert_eq!(r.bytes, 30000);
        let want = cache_decision(asset, i, scenario.seed);
        assert_eq!((r.shield_status, r.edge_status), (want.shield, want.edge));
        served += r.bytes;
    }
    let tally = sim.metrics().assets["/jquery.min.js"];
    let expected_hits = (0..20)
        .filter(|i| cache_decision(asset, *i, scenario.seed).edge == CacheStatus::Hit)
        .count() as u64;
    assert_eq!(tally.requests, 20);
    assert_eq!(tally.edge_hits, expected_hits);
    assert_eq!(tally.edge_hits + tally.edge_misses, 20);
    assert_eq!(tally.bytes, served);
}

#[test]
fn web_page_includes_think_time() {
    let sim = start();
    let resolver = Resolver::Dns { server: sim.addrs().dns, timeout: T };
    let url = format!("http://www.example:{}/index.html", sim.addrs().http.port());
    let r = probe_web(&url, &resolver, T);
    assert_eq!(r.http_status, Some(200));
    assert!(r.ttfb_ms >= 50.0, "{}", r.ttfb_ms);
    assert!(r.dns_ms >= 40.0);
    assert!(r.dns_ms <= r.connect_ms && r.connect_ms <= r.ttfb_ms && r.ttfb_ms <= r.total_ms);

    let missing = probe_web(&format!("http://www.example:{}/nope", sim.addrs().http.port()), &resolver, T);
    assert_eq!(missing.http_status, Some(404));
}

#[test]
fn shutdown_closes_every_service() {
    let sim = start();
    let addrs = sim.addrs();
    sim.shutdown();
    let short = Duration::from_millis(300);
    assert!(probe_latency(addrs.hop, "google", 3, 1, short).is_err());
    assert!(probe_speed(addrs.throughput, Direction::Down, short, short).is_err());
    assert!(!probe_dns("cdn.example", addrs.dns, short).map(|r| r.success).unwrap_or(false));
    let r = probe_cdn("x", &format!("http://127.0.0.1:{}/jquery.min.js", addrs.http.port()), &Resolver::System, short);
    assert_eq!(r.http_status, 0);
    assert!(r.error.is_some());
}

#[test]
fn bind_failure_is_a_startup_error() {
    let taken = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port();
    let s = Scenario::from_toml(SCENARIO).unwrap();
    let err = BackgroundSimnet::start(s, BindPlan::from(std::net::SocketAddr::from(([127, 0, 0, 1], port))))
        .err()
        .unwrap();
    assert!(matches!(err, SimnetError::Bind { service: "hop", .. }));
}

#[test]
fn metrics_endpoint_serves_json() {
    let sim = start();
    let resolver = Resolver::System;
    let url = format!("http://127.0.0.1:{}/metrics", sim.addrs().http.port());
    let r = probe_web(&url, &resolver, T);
    assert_eq!(r.http_status, Some(200));
    assert!(r.bytes > 0);
}
