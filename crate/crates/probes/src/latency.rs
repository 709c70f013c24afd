//! Path and latency probing over the hop-reveal protocol, an
//! application-level stand-in for TTL-limited traceroute.
//!
//! Request `HOP <target> <k>\n`; the server answers after the round-trip
//! delay of hop `k` with `HOP <k> <address>\n`, or `END <k> <address>\n` when
//! `k` is the destination. `ERR <reason>\n` means the target is unknown.

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream};
use std::time::{Duration, Instant};

use amigo_core::{HopStat, LatencyResult};
use tracing::debug;

use crate::error::{is_timeout, ProbeError};

enum Reply {
    Hop { address: String, terminal: bool },
    Unreachable,
}

struct Session {
    server: SocketAddr,
    timeout: Duration,
    conn: Option<BufReader<TcpStream>>,
}

impl Session {
    fn conn(&mut self) -> Result<&mut BufReader<TcpStream>, ProbeError> {
        if self.conn.is_none() {
            let s = TcpStream::connect_timeout(&self.server, self.timeout).map_err(|source| {
                ProbeError::Connect {
                    addr: self.server.to_string(),
                    source,
                }
            })?;
            let _ = s.set_nodelay(true);
            s.set_read_timeout(Some(self.timeout))?;
            s.set_write_timeout(Some(self.timeout))?;
            self.conn = Some(BufReader::new(s));
        }
        Ok(self.conn.as_mut().unwrap())
    }

    /// One probe; `Ok(None)` is a lost probe.
    fn probe(&mut self, target: &str, k: u32) -> Result<Option<(Reply, f64)>, ProbeError> {
        let conn = self.conn()?;
        let start = Instant::now();
        if let Err(e) = conn.get_mut().write_all(format!("HOP {target} {k}\n").as_bytes()) {
            debug!(error = %e, "hop probe write failed");
            self.conn = None;
            return Ok(None);
        }
        let mut line = String::new();
        match conn.read_line(&mut line) {
            Ok(0) => {
                self.conn = None;
                return Ok(None);
            }
            Ok(_) => {}
            Err(e) => {
                if !is_timeout(&e) {
                    debug!(error = %e, "hop probe read failed");
                }
                // a late reply would desynchronize the stream
                self.conn = None;
                return Ok(None);
            }
        }
        let rtt_ms = start.elapsed().as_secs_f64() * 1e3;
        let mut parts = line.split_whitespace();
        let reply = match (parts.next(), parts.next(), parts.next()) {
            (Some(kind @ ("HOP" | "END")), Some(idx), Some(addr)) => {
                if idx.parse::<u32>().ok() != Some(k) {
                    return Err(ProbeError::Protocol(format!("reply for wrong hop: {line:?}")));
                }
                Reply::Hop {
                    address: addr.to_string(),
                    terminal: kind == "END",
                }
            }
            (Some("ERR"), ..) => Reply::Unreachable,
            _ => return Err(ProbeError::Protocol(format!("unexpected reply {line:?}"))),
        };
        Ok(Some((reply, rtt_ms)))
    }
}

/// Probes hops `1..=max_hops` with `probes_per_hop` probes each, stopping at
/// the destination. The result is marked incomplete when the destination was
/// not reached: unknown target, `max_hops` exhausted, or a hop where every
/// probe was lost (that hop and anything after it are dropped).
pub fn probe_latency(
    server: SocketAddr,
    target: &str,
    max_hops: u32,
    probes_per_hop: u32,
    probe_timeout: Duration,
) -> Result<LatencyResult, ProbeError> {
    if probes_per_hop == 0 {
        return Err(ProbeError::InvalidTarget("probes_per_hop must be positive".into()));
    }
    if target.is_empty() || target.contains(char::is_whitespace) {
        return Err(ProbeError::InvalidTarget(format!("bad target {target:?}")));
    }
    let mut session = Session {
        server,
        timeout: probe_timeout,
        conn: None,
    };
    // Fail fast if the server itself is down.
    session.conn()?;

    let mut hops = Vec::new();
    for k in 1..=max_hops {
        let mut rtts = Vec::with_capacity(probes_per_hop as usize);
        let mut address = None;
        let mut terminal = false;
        for _ in 0..probes_per_hop {
            match session.probe(target, k)? {
                None => {}
                Some((Reply::Unreachable, _)) => {
                    return Ok(LatencyResult::from_hops(target, hops, false));
                }
                Some((Reply::Hop { address: a, terminal: t }, rtt)) => {
                    address.get_or_insert(a);
                    terminal |= t;
                    rtts.push(rtt);
                }
            }
        }
        let Some(address) = address else {
            return Ok(LatencyResult::from_hops(target, hops, false));
        };
        let best = rtts.iter().copied().fold(f64::INFINITY, f64::min);
        let worst = rtts.iter().copied().fold(0.0, f64::max);
        let avg = (rtts.iter().sum::<f64>() / rtts.len() as f64).clamp(best, worst);
        hops.push(HopStat {
            hop_index: k,
            address,
            sent: probes_per_hop,
            lost: probes_per_hop - rtts.len() as u32,
            avg_rtt_ms: avg,
            best_rtt_ms: best,
            worst_rtt_ms: worst,
        });
        if terminal {
            return Ok(LatencyResult::from_hops(target, hops, true));
        }
    }
    Ok(LatencyResult::from_hops(target, hops, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::net::TcpListener;
    use std::thread;

    /// Instant-reply hop server with a two-hop path to "dst".
    fn tiny_server() -> SocketAddr {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { return };
                thread::spawn(move || {
                    let mut w = stream.try_clone().unwrap();
                    for line in BufReader::new(stream).lines() {
                        let line = line.unwrap();
                        let p: Vec<&str> = line.split_whitespace().collect();
                        let reply = match (p[1], p[2]) {
                            ("dst", "1") => "HOP 1 10.0.0.1\n".to_string(),
                            ("dst", "2") => "END 2 dst\n".to_string(),
                            ("dst", k) => format!("END {k} dst\n"),
                            _ => "ERR unknown target\n".to_string(),
                        };
                        w.write_all(reply.as_bytes()).unwrap();
                    }
                });
            }
        });
        addr
    }

    #[test]
    fn reaches_terminal() {
        let addr = tiny_server();
        let r = probe_latency(addr, "dst", 30, 3, Duration::from_secs(2)).unwrap();
        assert!(r.complete);
        assert_eq!(r.hop_count, 2);
        assert_eq!(r.hops[1].address, "dst");
        assert_eq!(r.hops[0].sent, 3);
        assert_eq!(r.hops[0].lost, 0);
    }

    #[test]
    fn truncation_and_unknown_target() {
        let addr = tiny_server();
        let r = probe_latency(addr, "dst", 1, 2, Duration::from_secs(2)).unwrap();
        assert!(!r.complete);
        assert_eq!(r.hop_count, 1);
        let r = probe_latency(addr, "elsewhere", 5, 2, Duration::from_secs(2)).unwrap();
        assert!(!r.complete);
        assert_eq!(r.hop_count, 0);
        assert_eq!(r.final_avg_rtt_ms, 0.0);
    }

    #[test]
    fn server_down_is_an_error() {
        let addr = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
        assert!(probe_latency(addr, "dst", 5, 1, Duration::from_millis(200)).is_err());
    }
}
