//! Client side of the line-prefixed throughput protocol.
//!
//! * `DOWN <seconds>\n`: the server streams bytes for the duration and closes.
//! * `UP <seconds>\n`: the client streams for the duration, half-closes, and
//!   the server answers `OK <bytes>\n` with the bytes it accepted in time.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpStream};
use std::time::{Duration, Instant};

use amigo_core::record::compute_throughput_mbps;
use amigo_core::SpeedtestResult;
use serde::{Deserialize, Serialize};

use crate::error::{is_timeout, ProbeError};

/// A direction that ends before 90% of the requested duration is flagged.
pub const SHORTFALL_RATIO: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Down,
    Up,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionResult {
    pub direction: Direction,
    pub bytes: u64,
    pub duration_s: f64,
    pub elapsed_s: f64,
    pub mbps: f64,
    pub flagged: bool,
}

/// `bytes * 8 / duration_s / 10^6`.
pub fn compute_throughput(bytes: u64, duration_s: f64) -> f64 {
    compute_throughput_mbps(bytes, duration_s)
}

fn connect(server: SocketAddr, timeout: Duration) -> Result<TcpStream, ProbeError> {
    let stream = TcpStream::connect_timeout(&server, timeout).map_err(|source| ProbeError::Connect {
        addr: server.to_string(),
        source,
    })?;
    let _ = stream.set_nodelay(true);
    stream.set_read_timeout(Some(timeout))?;
    stream.set_write_timeout(Some(timeout))?;
    Ok(stream)
}

fn io_err(e: std::io::Error, timeout: Duration) -> ProbeError {
    if is_timeout(&e) {
        ProbeError::Timeout(timeout)
    } else {
        ProbeError::Io(e)
    }
}

/// Runs one direction of a throughput test. `timeout` bounds each individual
/// socket operation, not the whole test.
pub fn probe_speed(
    server: SocketAddr,
    direction: Direction,
    duration: Duration,
    timeout: Duration,
) -> Result<DirectionResult, ProbeError> {
    let duration_s = duration.as_secs_f64();
    if duration_s <= 0.0 {
        return Err(ProbeError::InvalidTarget("duration must be positive".into()));
    }
    let mut stream = connect(server, timeout)?;
    let start = Instant::now();
    let bytes = match direction {
        Direction::Down => {
            stream
                .write_all(format!("DOWN {duration_s}\n").as_bytes())
                .map_err(|e| io_err(e, timeout))?;
            let mut buf = vec![0u8; 64 * 1024];
            let mut total = 0u64;
            loop {
                match stream.read(&mut buf) {
                    Ok(0) => break,
                    Ok(n) => total += n as u64,
                    Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
                    Err(e) => return Err(io_err(e, timeout)),
                }
            }
            total
        }
        Direction::Up => {
            stream
                .write_all(format!("UP {duration_s}\n").as_bytes())
                .map_err(|e| io_err(e, timeout))?;
            let chunk = vec![0x5au8; 16 * 1024];
            while start.elapsed() < duration {
                match stream.write(&chunk) {
                    Ok(_) => {}
                    Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
                    // server gave up early; whatever it counted is the answer
                    Err(_) => break,
                }
            }
            let _ = stream.shutdown(Shutdown::Write);
            let mut line = String::new();
            BufReader::new(&stream)
                .read_line(&mut line)
                .map_err(|e| io_err(e, timeout))?;
            line.trim()
                .strip_prefix("OK ")
                .and_then(|n| n.trim().parse::<u64>().ok())
                .ok_or_else(|| ProbeError::Protocol(format!("unexpected upload reply {line:?}")))?
        }
    };
    let elapsed_s = start.elapsed().as_secs_f64();
    Ok(DirectionResult {
        direction,
        bytes,
        duration_s,
        elapsed_s,
        mbps: compute_throughput(bytes, duration_s),
        flagged: bytes == 0 || elapsed_s < SHORTFALL_RATIO * duration_s,
    })
}

/// Download then upload against the same server, folded into one record.
/// Failures become a zeroed, flagged result with `error` set.
pub fn run_speedtest(server: SocketAddr, duration: Duration, timeout: Duration) -> SpeedtestResult {
    let down = probe_speed(server, Direction::Down, duration, timeout);
    let up = match &down {
        Ok(_) => probe_speed(server, Direction::Up, duration, timeout),
        Err(e) => Err(ProbeError::Protocol(format!("skipped after download failure: {e}"))),
    };
    let duration_s = duration.as_secs_f64();
    let error = match (&down, &up) {
        (Err(e), _) => Some(format!("download: {e}")),
        (_, Err(e)) => Some(format!("upload: {e}")),
        _ => None,
    };
    let (bytes_down, fd) = down.as_ref().map_or((0, true), |d| (d.bytes, d.flagged));
    let (bytes_up, fu) = up.as_ref().map_or((0, true), |u| (u.bytes, u.flagged));
    SpeedtestResult {
        down_mbps: compute_throughput(bytes_down, duration_s),
        up_mbps: compute_throughput(bytes_up, duration_s),
        bytes_down,
        bytes_up,
        duration_s,
        flagged: fd || fu,
        error,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::net::TcpListener;
    use std::thread;

    #[test]
    fn formula_example() {
        assert_eq!(compute_throughput(37_500_000, 10.0), 30.0);
    }

    proptest! {
        #[test]
        fn throughput_is_linear(bytes in 0u64..1_000_000_000_000, d in 0.001f64..1000.0) {
            let base = compute_throughput(bytes, d);
            prop_assert_eq!(compute_throughput(bytes * 2, d), base * 2.0);
            let halved = compute_throughput(bytes, d * 2.0);
            prop_assert!((halved * 2.0 - base).abs() <= 1e-12 * base.max(1.0));
        }
    }

    #[test]
    fn stalled_server_gives_zero_flagged() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        thread::spawn(move || {
            let (s, _) = listener.accept().unwrap();
            let mut line = String::new();
            BufReader::new(&s).read_line(&mut line).unwrap();
            // close without sending anything
        });
        let r = probe_speed(addr, Direction::Down, Duration::from_secs(1), Duration::from_secs(2)).unwrap();
        assert_eq!(r.bytes, 0);
        assert_eq!(r.mbps, 0.0);
        assert!(r.flagged);
    }

    #[test]
    fn connection_refused_is_an_error() {
        let addr = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
        assert!(matches!(
            probe_speed(addr, Direction::Down, Duration::from_secs(1), Duration::from_secs(1)),
            Err(ProbeError::Connect { .. })
        ));
        let r = run_speedtest(addr, Duration::from_secs(1), Duration::from_secs(1));
        assert!(r.error.is_some());
        assert!(r.flagged);
    }
}
