//! Offline aggregation of measurement records.
//!
//! A [`Dataset`] is loaded from record JSONL plus a network registry. From
//! it the crate derives per-network class fractions, the distribution of
//! those fractions across networks, box statistics for DNS and CDN timings,
//! cache hit probabilities and video resolution shares, and writes them
//! out as JSON and plot-ready CSV.

pub mod cdf;
pub mod dataset;
pub mod emit;
pub mod error;
pub mod fractions;
pub mod reports;
pub mod stats;
pub mod synth;

pub use cdf::{crux_cdf, CdfSeries};
pub use dataset::{read_records, Dataset};
pub use emit::{emit_report, Format, Manifest, ManifestFile, ManifestSection, Report, SECTIONS};
pub use error::AnalysisError;
pub use fractions::{per_network_fraction, ClassSelector};
pub use reports::{
    cache_probability, cdn_report, dns_report, network_cdfs, summary, youtube_resolution_report,
    CacheRow, CdnContinentGroup, CdnReport, CdnStatusGroup, DnsGroup, DnsReport, NetworkCdf,
    Summary, YoutubeNetwork, YoutubeReport,
};
pub use stats::{box_stats, quantile_sorted, BoxStats};
