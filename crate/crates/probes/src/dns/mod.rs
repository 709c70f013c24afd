//! DNS lookup timing over UDP.

pub mod wire;

use std::net::{IpAddr, SocketAddr, UdpSocket};
use std::time::{Duration, Instant};

use amigo_core::{classify_resolver, DnsResult};

use crate::error::{is_timeout, ProbeError};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);

/// Times one A query for `domain` against `resolver`.
///
/// `lookup_ms` runs from the query send to the arrival of the matching
/// response. Timeouts and malformed or negative responses produce
/// `success = false` results; only an unusable resolver address or a local
/// socket failure is an `Err`.
pub fn probe_dns(domain: &str, resolver: SocketAddr, timeout: Duration) -> Result<DnsResult, ProbeError> {
    let IpAddr::V4(resolver_ip) = resolver.ip() else {
        return Err(ProbeError::InvalidTarget(format!(
            "resolver {resolver} is not an IPv4 address"
        )));
    };
    let resolver_ip = resolver_ip.to_string();
    let resolver_class = classify_resolver(&resolver_ip)
        .map_err(|e| ProbeError::InvalidTarget(e.to_string()))?;
    let mut result = DnsResult {
        domain: domain.to_string(),
        resolver_ip,
        resolver_class,
        lookup_ms: 0.0,
        success: false,
        answer: None,
        error: None,
    };

    let id: u16 = rand::random();
    let query = match wire::encode_query(id, domain) {
        Ok(q) => q,
        Err(e) => {
            result.error = Some(e.to_string());
            return Ok(result);
        }
    };
    let socket = UdpSocket::bind(("0.0.0.0", 0))?;
    socket.connect(resolver).map_err(|source| ProbeError::Connect {
        addr: resolver.to_string(),
        source,
    })?;

    let start = Instant::now();
    if let Err(e) = socket.send(&query) {
        result.error = Some(format!("send failed: {e}"));
        return Ok(result);
    }
    let mut buf = [0u8; 1500];
    loop {
        let remaining = timeout.saturating_sub(start.elapsed());
        if remaining.is_zero() {
            result.lookup_ms = timeout.as_secs_f64() * 1e3;
            result.error = Some("timeout".into());
            return Ok(result);
        }
        socket.set_read_timeout(Some(remaining))?;
        let n = match socket.recv(&mut buf) {
            Ok(n) => n,
            Err(e) if is_timeout(&e) => continue,
            Err(e) => {
                // ICMP port unreachable surfaces here on connected sockets
                result.lookup_ms = start.elapsed().as_secs_f64() * 1e3;
                result.error = Some(format!("receive failed: {e}"));
                return Ok(result);
            }
        };
        let elapsed = start.elapsed();
        let msg = match wire::decode(&buf[..n]) {
            Ok(m) => m,
            Err(e) => {
                result.lookup_ms = elapsed.as_secs_f64() * 1e3;
                result.error = Some(format!("malformed response: {e}"));
                return Ok(result);
            }
        };
        if msg.id != id || !msg.is_response {
            continue;
        }
        result.lookup_ms = elapsed.as_secs_f64() * 1e3;
        result.answer = msg.first_a().map(|ip| ip.to_string());
        result.success = msg.rcode == wire::RCODE_NOERROR && !msg.answers.is_empty();
        if !result.success {
            result.error = Some(match msg.rcode {
                wire::RCODE_NOERROR => "no answers".to_string(),
                wire::RCODE_NXDOMAIN => "NXDOMAIN".to_string(),
                wire::RCODE_SERVFAIL => "SERVFAIL".to_string(),
                other => format!("rcode {other}"),
            });
        }
        return Ok(result);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::net::Ipv4Addr;
    use std::thread;

    fn one_shot_resolver(reply: impl FnOnce(&[u8]) -> Vec<u8> + Send + 'static) -> SocketAddr {
        let sock = UdpSocket::bind("127.0.0.1:0").unwrap();
        let addr = sock.local_addr().unwrap();
        thread::spawn(move || {
            let mut buf = [0u8; 512];
            let (n, peer) = sock.recv_from(&mut buf).unwrap();
            let out = reply(&buf[..n]);
            sock.send_to(&out, peer).unwrap();
        });
        addr
    }

    #[test]
    fn answers_and_nxdomain() {
        let addr = one_shot_resolver(|q| {
            let q = wire::decode(q).unwrap();
            wire::encode_response(&q, 0, &[Ipv4Addr::new(127, 0, 0, 9)], 30)
        });
        let r = probe_dns("cdn.example", addr, DEFAULT_TIMEOUT).unwrap();
        assert!(r.success);
        assert_eq!(r.answer.as_deref(), Some("127.0.0.9"));
        assert_eq!(r.resolver_ip, "127.0.0.1");
        assert_eq!(r.resolver_class, amigo_core::ResolverClass::OperatorLocal);

        let addr = one_shot_resolver(|q| {
            let q = wire::decode(q).unwrap();
            wire::encode_response(&q, wire::RCODE_NXDOMAIN, &[], 0)
        });
        let r = probe_dns("missing.example", addr, DEFAULT_TIMEOUT).unwrap();
        assert!(!r.success);
        assert_eq!(r.error.as_deref(), Some("NXDOMAIN"));
    }

    #[test]
    fn garbage_response_is_a_failed_lookup() {
        let addr = one_shot_resolver(|_| vec![1, 2, 3]);
        let r = probe_dns("x.example", addr, DEFAULT_TIMEOUT).unwrap();
        assert!(!r.success);
        assert!(r.error.unwrap().starts_with("malformed"));
    }

    #[test]
    fn silent_resolver_times_out() {
        let sock = UdpSocket::bind("127.0.0.1:0").unwrap();
        let addr = sock.local_addr().unwrap();
        let r = probe_dns("x.example", addr, Duration::from_millis(150)).unwrap();
        drop(sock);
        assert!(!r.success);
        assert_eq!(r.lookup_ms, 150.0);
    }
}
