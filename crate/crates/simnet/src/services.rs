//! The four network services and the harness that runs them.

use std::collections::HashMap;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::State;
use axum::http::{header, HeaderName, HeaderValue, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::Router;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::io::{AsyncBufReadExt, AsyncReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream, UdpSocket};
use tokio::task::{JoinHandle, JoinSet};
use tokio::time::Instant;

use amigo_probes::dns::wire;

use crate::metrics::{Metrics, MetricsSnapshot};
use crate::model::{asset_body, cache_decision, hop_address, hop_delay_ms, TokenBucket};
use crate::scenario::Scenario;

#[derive(Debug, Error)]
pub enum SimnetError {
    #[error("cannot bind {service} on {addr}: {source}")]
    Bind {
        service: &'static str,
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("base port {0} leaves no room for four consecutive ports")]
    PortRange(u16),
}

/// Where to bind. A non-zero base port assigns consecutive ports:
/// hop, throughput, DNS, HTTP. Port 0 binds every service ephemerally.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BindPlan {
    pub ip: IpAddr,
    pub base_port: u16,
}

impl BindPlan {
    pub fn localhost_ephemeral() -> Self {
        Self {
            ip: IpAddr::V4(Ipv4Addr::LOCALHOST),
            base_port: 0,
        }
    }

    fn addr(&self, offset: u16) -> Result<SocketAddr, SimnetError> {
        if self.base_port == 0 {
            return Ok(SocketAddr::new(self.ip, 0));
        }
        let port = self
            .base_port
            .checked_add(offset)
            .ok_or(SimnetError::PortRange(self.base_port))?;
        Ok(SocketAddr::new(self.ip, port))
    }
}

impl From<SocketAddr> for BindPlan {
    fn from(a: SocketAddr) -> Self {
        Self {
            ip: a.ip(),
            base_port: a.port(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceAddrs {
    pub hop: SocketAddr,
    pub throughput: SocketAddr,
    pub dns: SocketAddr,
    pub http: SocketAddr,
}

struct Shared {
    scenario: Scenario,
    metrics: Metrics,
    target_counters: HashMap<String, AtomicU64>,
}

/// Running services. Dropping the handle leaves them running; call
/// [`SimnetHandle::shutdown`] to stop them.
pub struct SimnetHandle {
    pub addrs: ServiceAddrs,
    shared: Arc<Shared>,
    tasks: Vec<JoinHandle<()>>,
}

impl SimnetHandle {
    pub fn metrics(&self) -> MetricsSnapshot {
        self.shared.metrics.snapshot()
    }

    pub fn scenario(&self) -> &Scenario {
        &self.shared.scenario
    }

    /// Stops every service and closes the listening sockets.
    pub async fn shutdown(self) {
        for t in &self.tasks {
            t.abort();
        }
        for t in self.tasks {
            let _ = t.await;
        }
    }
}

/// Binds and starts all services on the current tokio runtime.
pub async fn serve(scenario: Scenario, bind: BindPlan) -> Result<SimnetHandle, SimnetError> {
    let bind_tcp = |service: &'static str, addr: SocketAddr| async move {
        TcpListener::bind(addr)
            .await
            .map_err(|source| SimnetError::Bind { service, addr, source })
    };
    let hop = bind_tcp("hop", bind.addr(0)?).await?;
    let thr = bind_tcp("throughput", bind.addr(1)?).await?;
    let dns_addr = bind.addr(2)?;
    let dns = UdpSocket::bind(dns_addr).await.map_err(|source| SimnetError::Bind {
        service: "dns",
        addr: dns_addr,
        source,
    })?;
    let http = bind_tcp("http", bind.addr(3)?).await?;

    let local = |r: std::io::Result<SocketAddr>, fallback: SocketAddr| r.unwrap_or(fallback);
    let addrs = ServiceAddrs {
        hop: local(hop.local_addr(), bind.addr(0)?),
        throughput: local(thr.local_addr(), bind.addr(1)?),
        dns: local(dns.local_addr(), dns_addr),
        http: local(http.local_addr(), bind.addr(3)?),
    };

    let shared = Arc::new(Shared {
        metrics: Metrics::for_scenario(&scenario),
        target_counters: scenario
            .targets
            .iter()
            .map(|t| (t.name.clone(), AtomicU64::new(0)))
            .collect(),
        scenario,
    });

    let router = Router::new().fallback(http_handler).with_state(shared.clone());
    let tasks = vec![
        tokio::spawn(accept_loop(hop, shared.clone(), handle_hop)),
        tokio::spawn(accept_loop(thr, shared.clone(), handle_throughput)),
        tokio::spawn(dns_loop(Arc::new(dns), shared.clone())),
        tokio::spawn(async move {
            if let Err(e) = axum::serve(http, router).await {
                tracing::warn!("http service stopped: {e}");
            }
        }),
    ];
    tracing::info!(?addrs, "simnet serving");
    Ok(SimnetHandle { addrs, shared, tasks })
}

/// A simnet on its own runtime, for blocking callers.
pub struct BackgroundSimnet {
    handle: Option<SimnetHandle>,
    runtime: Option<tokio::runtime::Runtime>,
}

impl BackgroundSimnet {
    pub fn start(scenario: Scenario, bind: BindPlan) -> Result<Self, SimnetError> {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .expect("tokio runtime");
        let handle = runtime.block_on(serve(scenario, bind))?;
        Ok(Self {
            handle: Some(handle),
            runtime: Some(runtime),
        })
    }

    pub fn addrs(&self) -> ServiceAddrs {
        self.handle.as_ref().expect("running").addrs
    }

    pub fn metrics(&self) -> MetricsSnapshot {
        self.handle.as_ref().expect("running").metrics()
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if let (Some(h), Some(rt)) = (self.handle.take(), self.runtime.take()) {
            rt.block_on(h.shutdown());
            rt.shutdown_timeout(Duration::from_secs(1));
        }
    }
}

impl Drop for BackgroundSimnet {
    fn drop(&mut self) {
        self.stop();
    }
}

async fn accept_loop<F, Fut>(listener: TcpListener, shared: Arc<Shared>, handler: F)
where
    F: Fn(TcpStream, Arc<Shared>) -> Fut,
    Fut: std::future::Future<Output = std::io::Result<()>> + Send + 'static,
{
    // Connection tasks live in the set, so aborting this loop ends them too.
    let mut conns = JoinSet::new();
    loop {
        tokio::select! {
            accepted = listener.accept() => match accepted {
                Ok((stream, _)) => {
                    let _ = stream.set_nodelay(true);
                    conns.spawn(handler(stream, shared.clone()));
                }
                Err(e) => tracing::warn!("accept failed: {e}"),
            },
            Some(done) = conns.join_next(), if !conns.is_empty() => {
                if let Ok(Err(e)) = done {
                    tracing::debug!("connection ended with error: {e}");
                }
            }
        }
    }
}

async fn handle_hop(stream: TcpStream, shared: Arc<Shared>) -> std::io::Result<()> {
    let (rd, mut wr) = stream.into_split();
    let mut lines = BufReader::new(rd).lines();
    while let Some(line) = lines.next_line().await? {
        let started = Instant::now();
        shared.metrics.hop.request();
        let mut parts = line.split_whitespace();
        let reply = match (parts.next(), parts.next(), parts.next().map(str::parse::<u32>)) {
            (Some("HOP"), Some(name), Some(Ok(k))) if k >= 1 => {
                match shared.scenario.targets.iter().position(|t| t.name == name) {
                    Some(t) => {
                        let target = &shared.scenario.targets[t];
                        let index = shared.target_counters[name].fetch_add(1, Ordering::Relaxed);
                        let delay = hop_delay_ms(&shared.scenario, target, k, index);
                        tokio::time::sleep_until(started + Duration::from_secs_f64(delay / 1000.0)).await;
                        let n = target.hop_cumulative_delays_ms.len() as u32;
                        let k = k.min(n);
                        let kind = if k == n { "END" } else { "HOP" };
                        format!("{kind} {k} {}\n", hop_address(t, target, k))
                    }
                    None => "ERR unknown target\n".to_string(),
                }
            }
            _ => "ERR bad request\n".to_string(),
        };
        shared.metrics.hop.add_bytes(reply.len() as u64);
        wr.write_all(reply.as_bytes()).await?;
    }
    Ok(())
}

const CHUNK: usize = 16 * 1024;

async fn handle_throughput(stream: TcpStream, shared: Arc<Shared>) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    reader.read_line(&mut line).await?;
    let mut parts = line.split_whitespace();
    let cmd = parts.next().unwrap_or("");
    let secs = parts.next().and_then(|s| s.parse::<f64>().ok());
    let secs = match secs {
        Some(s) if s.is_finite() && s > 0.0 && s <= 600.0 => s,
        _ => {
            reader.get_mut().write_all(b"ERR bad request\n").await?;
            return Ok(());
        }
    };
    let window = Duration::from_secs_f64(secs);
    let cfg = &shared.scenario.throughput;
    match cmd {
        "DOWN" => {
            shared.metrics.throughput_down.request();
            let mut bucket = TokenBucket::new(cfg.down_mbps);
            let start = Instant::now();
            let deadline = start + window;
            let stream = reader.get_mut();
            let payload = vec![0xa5u8; CHUNK];
            loop {
                let now = Instant::now();
                if now >= deadline {
                    break;
                }
                let wait = bucket.wait_for(now - start, CHUNK as u64);
                if !wait.is_zero() {
                    tokio::time::sleep_until((now + wait).min(deadline)).await;
                    if Instant::now() >= deadline {
                        break;
                    }
                }
                let n = bucket.take(Instant::now() - start, CHUNK as u64) as usize;
                if n == 0 {
                    continue;
                }
                stream.write_all(&payload[..n]).await?;
                shared.metrics.throughput_down.add_bytes(n as u64);
            }
            stream.shutdown().await?;
        }
        "UP" => {
            shared.metrics.throughput_up.request();
            let mut bucket = TokenBucket::new(cfg.up_mbps);
            let start = Instant::now();
            let deadline = start + window;
            let mut buf = vec![0u8; CHUNK];
            let mut total = 0u64;
            // Bytes already buffered with the command line count like any other.
            let mut eof = false;
            loop {
                let now = Instant::now();
                if now >= deadline {
                    break;
                }
                let wait = bucket.wait_for(now - start, CHUNK as u64);
                if !wait.is_zero() {
                    tokio::time::sleep_until((now + wait).min(deadline)).await;
                    continue;
                }
                let allowed = bucket.available(Instant::now() - start).min(CHUNK as u64) as usize;
                match tokio::time::timeout_at(deadline, reader.read(&mut buf[..allowed])).await {
                    Err(_) => break,
                    Ok(Ok(0)) => {
                        eof = true;
                        break;
                    }
                    Ok(Ok(n)) => {
                        bucket.take(Instant::now() - start, n as u64);
                        total += n as u64;
                    }
                    Ok(Err(e)) => return Err(e),
                }
            }
            shared.metrics.throughput_up.add_bytes(total);
            reader.get_mut().write_all(format!("OK {total}\n").as_bytes()).await?;
            if !eof {
                // Let the client finish its last writes, then close.
                let drain = async {
                    while reader.read(&mut buf).await? > 0 {}
                    Ok::<_, std::io::Error>(())
                };
                let _ = tokio::time::timeout(Duration::from_secs(30), drain).await;
            }
        }
        _ => {
            reader.get_mut().write_all(b"ERR bad request\n").await?;
        }
    }
    Ok(())
}

fn normalize_domain(name: &str) -> String {
    name.trim_end_matches('.').to_ascii_lowercase()
}

async fn dns_loop(socket: Arc<UdpSocket>, shared: Arc<Shared>) {
    let mut tasks = JoinSet::new();
    let mut buf = vec![0u8; 1500];
    loop {
        tokio::select! {
            recv = socket.recv_from(&mut buf) => {
                let (n, peer) = match recv {
                    Ok(v) => v,
                    Err(e) => {
                        tracing::debug!("dns recv failed: {e}");
                        continue;
                    }
                };
                let packet = buf[..n].to_vec();
                let socket = socket.clone();
                let shared = shared.clone();
                tasks.spawn(async move {
                    let started = Instant::now();
                    shared.metrics.dns.request();
                    let Some(reply) = dns_reply(&shared.scenario, &packet) else {
                        return;
                    };
                    tokio::time::sleep_until(started + Duration::from_secs_f64(shared.scenario.dns.delay_ms / 1000.0)).await;
                    if socket.send_to(&reply, peer).await.is_ok() {
                        shared.metrics.dns.add_bytes(reply.len() as u64);
                    }
                });
            }
            Some(_) = tasks.join_next(), if !tasks.is_empty() => {}
        }
    }
}

/// Builds the answer for one query packet; `None` drops it.
pub fn dns_reply(scenario: &Scenario, packet: &[u8]) -> Option<Vec<u8>> {
    let query = wire::decode(packet).ok()?;
    if query.is_response {
        return None;
    }
    let Some(q) = query.questions.first() else {
        return Some(wire::encode_response(&query, wire::RCODE_FORMERR, &[], 0));
    };
    let name = normalize_domain(&q.name);
    let fail = scenario.dns.fail_domains.iter().any(|d| normalize_domain(d) == name);
    let record = scenario
        .dns
        .records
        .iter()
        .find(|(d, _)| normalize_domain(d) == name)
        .and_then(|(_, ip)| ip.parse::<Ipv4Addr>().ok());
    Some(match (fail, record) {
        (true, _) => wire::encode_response(&query, wire::RCODE_SERVFAIL, &[], 0),
        (false, Some(ip)) if q.qtype == wire::TYPE_A => {
            wire::encode_response(&query, wire::RCODE_NOERROR, &[ip], 60)
        }
        (false, Some(_)) => wire::encode_response(&query, wire::RCODE_NOERROR, &[], 0),
        (false, None) => wire::encode_response(&query, wire::RCODE_NXDOMAIN, &[], 0),
    })
}

async fn http_handler(State(shared): State<Arc<Shared>>, uri: Uri) -> Response {
    let started = Instant::now();
    shared.metrics.http.request();
    let path = uri.path();
    if path == "/metrics" {
        return axum::Json(shared.metrics.snapshot()).into_response();
    }
    let (Some(asset), Some(counters)) = (shared.scenario.asset(path), shared.metrics.asset(path))
    else {
        return (StatusCode::NOT_FOUND, "not found\n").into_response();
    };
    let index = counters.next_index();
    let decision = cache_decision(asset, index, shared.scenario.seed);
    tokio::time::sleep_until(started + Duration::from_secs_f64(asset.think_time_ms / 1000.0)).await;
    let body = asset_body(&asset.path, asset.bytes);
    counters.tally(decision.shield, decision.edge, asset.bytes);
    shared.metrics.http.add_bytes(asset.bytes);

    let mut resp = body.into_response();
    let headers = resp.headers_mut();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("application/octet-stream"));
    for (k, v) in decision.headers {
        if let (Ok(k), Ok(v)) = (HeaderName::try_from(k), HeaderValue::try_from(v)) {
            headers.insert(k, v);
        }
    }
    resp
}
