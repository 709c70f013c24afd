use std::time::Duration;

use amigo_core::{CacheStatus, CdnResult};

use crate::cache_headers::parse_cache_headers;
use crate::http::{self, Resolver};

/// Downloads `url` once and records the total time plus the cache verdict
/// carried in the response headers. Always yields a record: transport
/// failures set `error` and `http_status = 0`, non-2xx responses keep their
/// status with both cache statuses `Unknown`.
pub fn probe_cdn(cdn_name: &str, url: &str, resolver: &Resolver, timeout: Duration) -> CdnResult {
    match http::get(url, resolver, timeout) {
        Ok(resp) => {
            let ok = (200..300).contains(&resp.status);
            let parsed = parse_cache_headers(resp.headers.iter().map(|(n, v)| (n.as_str(), v.as_str())));
            let (shield, edge) = if ok {
                (parsed.shield_status, parsed.edge_status)
            } else {
                (CacheStatus::Unknown, CacheStatus::Unknown)
            };
            CdnResult {
                cdn_name: cdn_name.to_string(),
                url: url.to_string(),
                http_status: resp.status,
                total_ms: resp.timings.total_ms,
                bytes: resp.body_bytes,
                shield_status: shield,
                edge_status: edge,
                error: None,
            }
        }
        Err(failure) => CdnResult {
            cdn_name: cdn_name.to_string(),
            url: url.to_string(),
            http_status: 0,
            total_ms: failure.timings.total_ms,
            bytes: failure.body_bytes,
            shield_status: CacheStatus::Unknown,
            edge_status: CacheStatus::Unknown,
            error: Some(failure.to_string()),
        },
    }
}
