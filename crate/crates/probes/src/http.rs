//! Minimal HTTP/1.1 GET client that records cumulative phase timings.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::time::{Duration, Instant};

use amigo_core::WebPhase;
use url::{Host, Url};

use crate::dns::probe_dns;
use crate::error::is_timeout;

const MAX_HEADER_BYTES: usize = 64 * 1024;

/// How host names in URLs are turned into addresses.
#[derive(Debug, Clone, Default)]
pub enum Resolver {
    /// The operating system resolver.
    #[default]
    System,
    /// Query this DNS server directly with the in-repo codec.
    Dns { server: SocketAddr, timeout: Duration },
}

/// Milliseconds from request start to the end of each phase.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    pub dns_ms: f64,
    pub connect_ms: f64,
    pub ttfb_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone)]
pub struct HttpResponse {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body_bytes: u64,
    pub timings: PhaseTimings,
}

impl HttpResponse {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct HttpFailure {
    pub phase: WebPhase,
    pub timings: PhaseTimings,
    pub message: String,
    /// Body bytes received before the failure.
    pub body_bytes: u64,
}

impl std::fmt::Display for HttpFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?} phase failed: {}", self.phase, self.message)
    }
}

struct Clock {
    start: Instant,
    timings: PhaseTimings,
}

impl Clock {
    fn ms(&self) -> f64 {
        self.start.elapsed().as_secs_f64() * 1e3
    }

    fn fail(&self, phase: WebPhase, message: impl Into<String>, body_bytes: u64) -> HttpFailure {
        let mut timings = self.timings;
        timings.total_ms = self.ms();
        HttpFailure {
            phase,
            timings,
            message: message.into(),
            body_bytes,
        }
    }
}

fn resolve(host: &str, port: u16, resolver: &Resolver) -> Result<SocketAddr, String> {
    match resolver {
        Resolver::System => {
            let addrs: Vec<SocketAddr> = (host, port)
                .to_socket_addrs()
                .map_err(|e| format!("cannot resolve {host}: {e}"))?
                .collect();
            addrs
                .iter()
                .find(|a| a.is_ipv4())
                .or(addrs.first())
                .copied()
                .ok_or_else(|| format!("{host} has no addresses"))
        }
        Resolver::Dns { server, timeout } => {
            let r = probe_dns(host, *server, *timeout).map_err(|e| e.to_string())?;
            match (r.success, r.answer) {
                (true, Some(ip)) => {
                    let ip: std::net::IpAddr = ip.parse().map_err(|_| "bad answer".to_string())?;
                    Ok(SocketAddr::new(ip, port))
                }
                _ => Err(format!(
                    "lookup of {host} failed: {}",
                    r.error.unwrap_or_else(|| "no answer".into())
                )),
            }
        }
    }
}

/// Fetches `url` with a single GET over a fresh connection.
pub fn get(url: &str, resolver: &Resolver, timeout: Duration) -> Result<HttpResponse, HttpFailure> {
    let mut clock = Clock {
        start: Instant::now(),
        timings: PhaseTimings::default(),
    };
    let parsed = Url::parse(url).map_err(|e| clock.fail(WebPhase::Dns, format!("bad url: {e}"), 0))?;
    if parsed.scheme() != "http" {
        return Err(clock.fail(WebPhase::Connect, format!("unsupported scheme {}", parsed.scheme()), 0));
    }
    let port = parsed.port_or_known_default().unwrap_or(80);
    let addr = match parsed.host() {
        Some(Host::Ipv4(ip)) => SocketAddr::new(ip.into(), port),
        Some(Host::Ipv6(ip)) => SocketAddr::new(ip.into(), port),
        Some(Host::Domain(name)) => {
            let addr = resolve(name, port, resolver).map_err(|m| clock.fail(WebPhase::Dns, m, 0))?;
            clock.timings.dns_ms = clock.ms();
            addr
        }
        None => return Err(clock.fail(WebPhase::Dns, "url has no host", 0)),
    };

    let stream = TcpStream::connect_timeout(&addr, timeout)
        .map_err(|e| clock.fail(WebPhase::Connect, format!("connect {addr}: {e}"), 0))?;
    clock.timings.connect_ms = clock.ms();
    let _ = stream.set_nodelay(true);
    stream
        .set_read_timeout(Some(timeout))
        .and_then(|_| stream.set_write_timeout(Some(timeout)))
        .map_err(|e| clock.fail(WebPhase::Connect, e.to_string(), 0))?;

    let host_header = match parsed.port() {
        Some(p) => format!("{}:{p}", parsed.host_str().unwrap_or_default()),
        None => parsed.host_str().unwrap_or_default().to_string(),
    };
    let path = match parsed.query() {
        Some(q) => format!("{}?{q}", parsed.path()),
        None => parsed.path().to_string(),
    };
    let request = format!(
        "GET {path} HTTP/1.1\r\nHost: {host_header}\r\nUser-Agent: amigo-probe/{}\r\nAccept: */*\r\nConnection: close\r\n\r\n",
        env!("CARGO_PKG_VERSION")
    );
    let mut writer = &stream;
    writer
        .write_all(request.as_bytes())
        .map_err(|e| clock.fail(WebPhase::FirstByte, format!("send request: {e}"), 0))?;

    let mut reader = BufReader::with_capacity(64 * 1024, &stream);
    match reader.fill_buf() {
        Ok([]) => return Err(clock.fail(WebPhase::FirstByte, "connection closed before response", 0)),
        Ok(_) => clock.timings.ttfb_ms = clock.ms(),
        Err(e) if is_timeout(&e) => return Err(clock.fail(WebPhase::FirstByte, "timeout", 0)),
        Err(e) => return Err(clock.fail(WebPhase::FirstByte, e.to_string(), 0)),
    }

    let (status, headers) =
        read_head(&mut reader).map_err(|e| clock.fail(WebPhase::Transfer, format!("response head: {e}"), 0))?;
    let find = |name: &str| {
        headers
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.trim().to_string())
    };
    let chunked = find("transfer-encoding").is_some_and(|v| v.to_ascii_lowercase().contains("chunked"));
    let length = find("content-length").and_then(|v| v.parse::<u64>().ok());

    let mut counter = CountingSink::default();
    let body = if status == 204 || status == 304 || (100..200).contains(&status) {
        Ok(())
    } else if chunked {
        read_chunked(&mut reader, &mut counter)
    } else if let Some(n) = length {
        copy_exact(&mut reader, n, &mut counter)
    } else {
        io::copy(&mut reader, &mut counter).map(|_| ())
    };
    if let Err(e) = body {
        let msg = if is_timeout(&e) { "timeout".to_string() } else { e.to_string() };
        return Err(clock.fail(WebPhase::Transfer, msg, counter.0));
    }
    clock.timings.total_ms = clock.ms();
    Ok(HttpResponse {
        status,
        headers,
        body_bytes: counter.0,
        timings: clock.timings,
    })
}

#[derive(Default)]
struct CountingSink(u64);

impl Write for CountingSink {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0 += buf.len() as u64;
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

fn read_crlf_line<R: BufRead>(reader: &mut R, budget: &mut usize) -> io::Result<String> {
    let mut line = Vec::new();
    let n = reader.take(*budget as u64).read_until(b'\n', &mut line)?;
    if n == 0 {
        return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "connection closed"));
    }
    *budget = budget.saturating_sub(n);
    if !line.ends_with(b"\n") {
        return Err(invalid("header section too large"));
    }
    while matches!(line.last(), Some(b'\n' | b'\r')) {
        line.pop();
    }
    String::from_utf8(line).map_err(|_| invalid("non-UTF-8 header"))
}

fn read_head<R: BufRead>(reader: &mut R) -> io::Result<(u16, Vec<(String, String)>)> {
    let mut budget = MAX_HEADER_BYTES;
    let status_line = read_crlf_line(reader, &mut budget)?;
    let mut parts = status_line.splitn(3, ' ');
    let version = parts.next().unwrap_or_default();
    if !version.starts_with("HTTP/1.") {
        return Err(invalid(format!("bad status line {status_line:?}")));
    }
    let status = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| invalid(format!("bad status line {status_line:?}")))?;
    let mut headers = Vec::new();
    loop {
        let line = read_crlf_line(reader, &mut budget)?;
        if line.is_empty() {
            break;
        }
        let (name, value) = line
            .split_once(':')
            .ok_or_else(|| invalid(format!("bad header line {line:?}")))?;
        headers.push((name.trim().to_string(), value.trim().to_string()));
    }
    Ok((status, headers))
}

fn copy_exact<R: Read, W: Write>(reader: &mut R, n: u64, out: &mut W) -> io::Result<()> {
    let copied = io::copy(&mut reader.take(n), out)?;
    if copied < n {
        return Err(io::Error::new(
            io::ErrorKind::UnexpectedEof,
            format!("body ended after {copied} of {n} bytes"),
        ));
    }
    Ok(())
}

fn read_chunked<R: BufRead, W: Write>(reader: &mut R, out: &mut W) -> io::Result<()> {
    loop {
        let mut budget = 1024;
        let line = read_crlf_line(reader, &mut budget)?;
        let size_hex = line.split(';').next().unwrap_or("").trim();
        let size = u64::from_str_radix(size_hex, 16).map_err(|_| invalid(format!("bad chunk size {line:?}")))?;
        if size == 0 {
            // trailers until the blank line
            loop {
                let mut budget = MAX_HEADER_BYTES;
                if read_crlf_line(reader, &mut budget)?.is_empty() {
                    return Ok(());
                }
            }
        }
        copy_exact(reader, size, out)?;
        let mut budget = 4;
        if !read_crlf_line(reader, &mut budget)?.is_empty() {
            return Err(invalid("missing CRLF after chunk"));
        }
    }
}
