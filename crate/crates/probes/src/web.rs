use std::time::Duration;

use amigo_core::WebResult;

use crate::http::{self, Resolver};

/// Page-load timing proxy: one GET with DNS, connect, first-byte and total
/// boundaries. `speed_index_s` is never measured here; it can only be
/// attached later from an external import.
pub fn probe_web(url: &str, resolver: &Resolver, timeout: Duration) -> WebResult {
    match http::get(url, resolver, timeout) {
        Ok(resp) => WebResult {
            url: url.to_string(),
            dns_ms: resp.timings.dns_ms,
            connect_ms: resp.timings.connect_ms,
            ttfb_ms: resp.timings.ttfb_ms,
            total_ms: resp.timings.total_ms,
            bytes: resp.body_bytes,
            speed_index_s: None,
            http_status: Some(resp.status),
            failed_phase: None,
        },
        Err(failure) => WebResult {
            url: url.to_string(),
            dns_ms: failure.timings.dns_ms,
            connect_ms: failure.timings.connect_ms,
            ttfb_ms: failure.timings.ttfb_ms,
            total_ms: failure.timings.total_ms,
            bytes: failure.body_bytes,
            speed_index_s: None,
            http_status: None,
            failed_phase: Some(failure.phase),
        },
    }
}
