//! CDN cache status from response headers.
//!
//! `cf-cache-status` carries a single token for the edge. `x-cache` carries
//! either one token (edge) or a `shield, edge` pair, the shield being the
//! mid-tier cache between origin and edge. When both headers are present
//! `cf-cache-status` wins.

use amigo_core::CacheStatus;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheHeaderSource {
    XCache,
    CfCacheStatus,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheHeaderParse {
    pub shield_status: CacheStatus,
    pub edge_status: CacheStatus,
    pub source_header: CacheHeaderSource,
}

impl Default for CacheHeaderParse {
    fn default() -> Self {
        Self {
            shield_status: CacheStatus::Unknown,
            edge_status: CacheStatus::Unknown,
            source_header: CacheHeaderSource::None,
        }
    }
}

fn token_status(token: &str) -> CacheStatus {
    // "Hit from cloudfront" style values still lead with the verdict
    match token.split_whitespace().next() {
        Some(w) if w.eq_ignore_ascii_case("hit") => CacheStatus::Hit,
        Some(w) if w.eq_ignore_ascii_case("miss") => CacheStatus::Miss,
        _ => CacheStatus::Unknown,
    }
}

/// Header names match case-insensitively; the first occurrence of a name is
/// used.
pub fn parse_cache_headers<'a, I, K, V>(headers: I) -> CacheHeaderParse
where
    I: IntoIterator<Item = (K, V)>,
    K: AsRef<str> + 'a,
    V: AsRef<str> + 'a,
{
    let mut cf: Option<String> = None;
    let mut x_cache: Option<String> = None;
    for (name, value) in headers {
        let name = name.as_ref().trim();
        if cf.is_none() && name.eq_ignore_ascii_case("cf-cache-status") {
            cf = Some(value.as_ref().to_string());
        } else if x_cache.is_none() && name.eq_ignore_ascii_case("x-cache") {
            x_cache = Some(value.as_ref().to_string());
        }
    }

    if let Some(value) = cf {
        return CacheHeaderParse {
            shield_status: CacheStatus::Unknown,
            edge_status: token_status(value.trim()),
            source_header: CacheHeaderSource::CfCacheStatus,
        };
    }
    if let Some(value) = x_cache {
        let tokens: Vec<&str> = value.split(',').map(str::trim).collect();
        let (shield, edge) = match tokens.as_slice() {
            [edge] => (CacheStatus::Unknown, token_status(edge)),
            [shield, .., edge] => (token_status(shield), token_status(edge)),
            [] => (CacheStatus::Unknown, CacheStatus::Unknown),
        };
        return CacheHeaderParse {
            shield_status: shield,
            edge_status: edge,
            source_header: CacheHeaderSource::XCache,
        };
    }
    CacheHeaderParse::default()
}
