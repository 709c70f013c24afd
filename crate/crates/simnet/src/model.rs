//! Pure models behind the services: keyed draws, cache decisions, hop delays
//! and the token bucket. The services and any virtual-time consumer share these.

use std::time::Duration;

use amigo_core::CacheStatus;

use crate::scenario::{Asset, CacheMode, HeaderStyle, Scenario, Target};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Counter-based draw keyed by (seed, key, index, stream).
pub fn keyed_u64(seed: u64, key: &str, index: u64, stream: u64) -> u64 {
    let mut z = splitmix(seed ^ stream.wrapping_mul(GOLDEN));
    z = splitmix(z ^ fnv1a(key.as_bytes()));
    splitmix(z ^ index)
}

/// Uniform in [0, 1).
pub fn keyed_unit(seed: u64, key: &str, index: u64, stream: u64) -> f64 {
    (keyed_u64(seed, key, index, stream) >> 11) as f64 / (1u64 << 53) as f64
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheDecision {
    pub shield: CacheStatus,
    pub edge: CacheStatus,
    pub headers: Vec<(String, String)>,
}

fn label(s: CacheStatus) -> &'static str {
    match s {
        CacheStatus::Hit => "HIT",
        CacheStatus::Miss => "MISS",
        CacheStatus::Unknown => "UNKNOWN",
    }
}

fn draw(mode: CacheMode, seed: u64, path: &str, index: u64, stream: u64) -> CacheStatus {
    let hit = match mode {
        CacheMode::AlwaysHit => true,
        CacheMode::AlwaysMiss => false,
        CacheMode::HitRatio { hit_ratio } => keyed_unit(seed, path, index, stream) < hit_ratio,
    };
    if hit {
        CacheStatus::Hit
    } else {
        CacheStatus::Miss
    }
}

/// Cache outcome of the `request_index`-th request for `asset`. The edge uses
/// draw stream 0 and the shield stream 1; styles without a shield layer
/// report the shield as unknown.
pub fn cache_decision(asset: &Asset, request_index: u64, seed: u64) -> CacheDecision {
    let mode = asset.cache_policy.mode;
    let edge = draw(mode, seed, &asset.path, request_index, 0);
    match asset.cache_policy.header_style {
        HeaderStyle::Cf => CacheDecision {
            shield: CacheStatus::Unknown,
            edge,
            headers: vec![("cf-cache-status".into(), label(edge).into())],
        },
        HeaderStyle::XCacheSingle => CacheDecision {
            shield: CacheStatus::Unknown,
            edge,
            headers: vec![("x-cache".into(), label(edge).into())],
        },
        HeaderStyle::XCacheDual => {
            let shield = draw(mode, seed, &asset.path, request_index, 1);
            CacheDecision {
                shield,
                edge,
                headers: vec![(
                    "x-cache".into(),
                    format!("{}, {}", label(shield), label(edge)),
                )],
            }
        }
    }
}

/// Deterministic body for an asset of `len` bytes.
pub fn asset_body(path: &str, len: u64) -> Vec<u8> {
    let tag = fnv1a(path.as_bytes()).to_le_bytes();
    (0..len as usize).map(|i| tag[i % 8] ^ (i as u8)).collect()
}

/// Delay in milliseconds for hop `k` (1-based, clamped to the terminal hop)
/// on the `index`-th request for the target.
pub fn hop_delay_ms(scenario: &Scenario, target: &Target, k: u32, index: u64) -> f64 {
    let n = target.hop_cumulative_delays_ms.len();
    let k = (k as usize).clamp(1, n);
    let base = target.hop_cumulative_delays_ms[k - 1];
    let jitter = if target.jitter_ms > 0.0 {
        keyed_unit(scenario.seed, &target.name, index, 16 + k as u64) * target.jitter_ms
    } else {
        0.0
    };
    base + jitter
}

/// Address reported for hop `k` of the target at position `t` in the scenario.
pub fn hop_address(t: usize, target: &Target, k: u32) -> String {
    let n = target.hop_cumulative_delays_ms.len();
    let k = (k as usize).clamp(1, n);
    if let Some(a) = target.hop_addresses.get(k - 1) {
        return a.clone();
    }
    if k == n {
        target.name.clone()
    } else {
        format!("10.{}.{}.1", t % 256, k % 256)
    }
}

pub const REFILL_INTERVAL: Duration = Duration::from_millis(100);

/// Token bucket holding at most one refill interval's worth of bytes. Tokens
/// accrue continuously at the cap, starting empty, so bytes granted over any
/// window `w` stay within `cap * (w + 0.1 s)`.
#[derive(Debug, Clone)]
pub struct TokenBucket {
    bytes_per_s: f64,
    capacity: f64,
    tokens: f64,
    last: Duration,
}

impl TokenBucket {
    pub fn new(cap_mbps: f64) -> Self {
        let bytes_per_s = cap_mbps * 1e6 / 8.0;
        Self {
            bytes_per_s,
            capacity: bytes_per_s * REFILL_INTERVAL.as_secs_f64(),
            tokens: 0.0,
            last: Duration::ZERO,
        }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity as u64
    }

    fn refill(&mut self, now: Duration) {
        if now > self.last {
            let dt = (now - self.last).as_secs_f64();
            self.tokens = (self.tokens + dt * self.bytes_per_s).min(self.capacity);
            self.last = now;
        }
    }

    /// Whole bytes available at `now` (time since the bucket's epoch).
    pub fn available(&mut self, now: Duration) -> u64 {
        self.refill(now);
        self.tokens.max(0.0) as u64
    }

    /// Takes up to `want` bytes at `now`, returning how many were granted.
    pub fn take(&mut self, now: Duration, want: u64) -> u64 {
        let granted = self.available(now).min(want);
        self.tokens -= granted as f64;
        granted
    }

    /// Time until at least `want` bytes (capped at capacity) are available.
    pub fn wait_for(&mut self, now: Duration, want: u64) -> Duration {
        self.refill(now);
        let want = (want as f64).min(self.capacity);
        if self.tokens >= want {
            Duration::ZERO
        } else {
            Duration::from_secs_f64((want - self.tokens) / self.bytes_per_s)
        }
    }
}
