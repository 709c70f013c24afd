//! Measurement tool suite.
//!
//! Every probe is a blocking, single-connection operation with no shared
//! state, so independent probes can run on separate threads. Network probes
//! speak plain protocols only: DNS over UDP, HTTP/1.1 without TLS, and the
//! line-oriented throughput and hop-reveal protocols served by `amigo-simnet`.

pub mod cache_headers;
pub mod cdn;
pub mod dns;
mod error;
pub mod hop_report;
pub mod http;
pub mod latency;
pub mod throughput;
pub mod web;
pub mod youtube;

pub use cache_headers::{parse_cache_headers, CacheHeaderParse, CacheHeaderSource};
pub use cdn::probe_cdn;
pub use dns::probe_dns;
pub use error::ProbeError;
pub use hop_report::{emit_hop_report, parse_hop_report, HopReport, HopReportError};
pub use http::Resolver;
pub use latency::probe_latency;
pub use throughput::{compute_throughput, probe_speed, run_speedtest, Direction, DirectionResult};
pub use web::probe_web;
pub use youtube::{parse_youtube_stats, YoutubeParse, YoutubeParseError};
