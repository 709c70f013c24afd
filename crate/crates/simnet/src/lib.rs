//! Scenario-driven mock network.
//!
//! Serves the hop-reveal, throughput, DNS and HTTP endpoints the probes talk
//! to, with delays, bandwidth caps and cache behaviour taken from a
//! [`Scenario`]. Every random choice is a keyed draw on the scenario seed.

pub mod metrics;
pub mod model;
pub mod scenario;
mod services;

pub use metrics::{AssetSnapshot, Metrics, MetricsSnapshot, ServiceSnapshot};
pub use model::{cache_decision, CacheDecision, TokenBucket};
pub use scenario::{
    load_scenario, Asset, CacheMode, CachePolicy, Check, DnsConfig, HeaderStyle, Scenario,
    ScenarioError, Target, ThroughputConfig,
};
pub use services::{dns_reply, serve, BackgroundSimnet, BindPlan, ServiceAddrs, SimnetError, SimnetHandle};
