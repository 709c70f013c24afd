//! Threshold classifiers.
//!
//! Speed bands: slow at or below 15 Mbps, fast at or above 30 Mbps, average
//! strictly in between. Latency bands are not a partition of the axis: only
//! `<= 20`, `[50, 100]` and `>= 150` ms carry a name, everything else is
//! [`LatencyClass::Unclassified`]. Page SpeedIndex bands: fast up to 3.4 s,
//! slow from 5.8 s.

use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use crate::error::ClassifyError;

pub const SPEED_SLOW_MAX_MBPS: f64 = 15.0;
pub const SPEED_FAST_MIN_MBPS: f64 = 30.0;
pub const LATENCY_EXCEPTIONAL_MAX_MS: f64 = 20.0;
pub const LATENCY_GOOD_MIN_MS: f64 = 50.0;
pub const LATENCY_GOOD_MAX_MS: f64 = 100.0;
pub const LATENCY_POOR_MIN_MS: f64 = 150.0;
pub const SPEED_INDEX_FAST_MAX_S: f64 = 3.4;
pub const SPEED_INDEX_SLOW_MIN_S: f64 = 5.8;
pub const GOOGLE_RESOLVERS: [Ipv4Addr; 2] = [Ipv4Addr::new(8, 8, 8, 8), Ipv4Addr::new(8, 8, 4, 4)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedClass {
    Slow,
    Average,
    Fast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatencyClass {
    Exceptional,
    GoodToAverage,
    LessDesirable,
    Unclassified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedIndexClass {
    Fast,
    Moderate,
    Slow,
}

#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum CacheStatus {
    Hit,
    Miss,
    #[default]
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolverClass {
    #[serde(rename = "google_dns")]
    GoogleDns,
    OperatorLocal,
}

macro_rules! enum_names {
    ($ty:ty { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub const ALL: &'static [$ty] = &[$(<$ty>::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(<$ty>::$variant => $name),+
                }
            }
        }

        impl std::fmt::Display for $ty {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

enum_names!(SpeedClass { Slow => "slow", Average => "average", Fast => "fast" });
enum_names!(LatencyClass {
    Exceptional => "exceptional",
    GoodToAverage => "good_to_average",
    LessDesirable => "less_desirable",
    Unclassified => "unclassified",
});
enum_names!(SpeedIndexClass { Fast => "fast", Moderate => "moderate", Slow => "slow" });
enum_names!(CacheStatus { Hit => "hit", Miss => "miss", Unknown => "unknown" });
enum_names!(ResolverClass { GoogleDns => "google_dns", OperatorLocal => "operator_local" });

fn non_negative(value: f64) -> Result<f64, ClassifyError> {
    // NaN fails this comparison too
    if value >= 0.0 {
        Ok(value)
    } else {
        Err(ClassifyError::Negative(value))
    }
}

pub fn classify_speed(mbps: f64) -> Result<SpeedClass, ClassifyError> {
    let mbps = non_negative(mbps)?;
    Ok(if mbps <= SPEED_SLOW_MAX_MBPS {
        SpeedClass::Slow
    } else if mbps < SPEED_FAST_MIN_MBPS {
        SpeedClass::Average
    } else {
        SpeedClass::Fast
    })
}

pub fn classify_latency(rtt_ms: f64) -> Result<LatencyClass, ClassifyError> {
    let rtt = non_negative(rtt_ms)?;
    Ok(if rtt <= LATENCY_EXCEPTIONAL_MAX_MS {
        LatencyClass::Exceptional
    } else if (LATENCY_GOOD_MIN_MS..=LATENCY_GOOD_MAX_MS).contains(&rtt) {
        LatencyClass::GoodToAverage
    } else if rtt >= LATENCY_POOR_MIN_MS {
        LatencyClass::LessDesirable
    } else {
        LatencyClass::Unclassified
    })
}

pub fn classify_speed_index(si_s: f64) -> Result<SpeedIndexClass, ClassifyError> {
    let si = non_negative(si_s)?;
    Ok(if si <= SPEED_INDEX_FAST_MAX_S {
        SpeedIndexClass::Fast
    } else if si < SPEED_INDEX_SLOW_MIN_S {
        SpeedIndexClass::Moderate
    } else {
        SpeedIndexClass::Slow
    })
}

/// Google's public anycast resolvers are `GoogleDns`; every other address,
/// including third-party public resolvers, counts as operator-provided.
pub fn classify_resolver(ip: &str) -> Result<ResolverClass, ClassifyError> {
    let addr: Ipv4Addr = ip
        .trim()
        .parse()
        .map_err(|_| ClassifyError::MalformedAddress(ip.to_string()))?;
    Ok(if GOOGLE_RESOLVERS.contains(&addr) {
        ResolverClass::GoogleDns
    } else {
        ResolverClass::OperatorLocal
    })
}
