use std::collections::BTreeMap;

use amigo_core::{CacheStatus, Continent, ExperimentKind, Payload, Resolution, ResolverClass};
use serde::{Deserialize, Serialize};

use crate::cdf::{crux_cdf, CdfSeries};
use crate::dataset::Dataset;
use crate::fractions::{per_network_fraction, ClassSelector};
use crate::stats::{box_stats, BoxStats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub records: usize,
    pub networks: usize,
    pub quarantined: usize,
    pub duplicates_dropped: usize,
    pub by_kind: BTreeMap<ExperimentKind, usize>,
}

pub fn summary(ds: &Dataset) -> Summary {
    let mut by_kind = BTreeMap::new();
    let mut networks = std::collections::BTreeSet::new();
    for r in &ds.records {
        *by_kind.entry(r.experiment_kind).or_insert(0) += 1;
        networks.insert(r.network_id.as_str());
    }
    Summary {
        records: ds.records.len(),
        networks: networks.len(),
        quarantined: ds.quarantined.len(),
        duplicates_dropped: ds.duplicates_dropped,
        by_kind,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCdf {
    pub selector: ClassSelector,
    pub series: CdfSeries,
}

/// One series per metric/class pair that has at least one tested network.
pub fn network_cdfs(ds: &Dataset) -> Vec<NetworkCdf> {
    ClassSelector::all()
        .into_iter()
        .filter_map(|selector| {
            let fractions = per_network_fraction(ds, selector);
            crux_cdf(&fractions)
                .ok()
                .map(|series| NetworkCdf { selector, series })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnsGroup {
    pub operator: String,
    pub resolver_class: ResolverClass,
    pub lookups: usize,
    /// This class's share of the operator's lookups.
    pub usage_share: f64,
    /// Successful lookups only; absent when every lookup failed.
    pub lookup_ms: Option<BoxStats>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DnsReport {
    pub groups: Vec<DnsGroup>,
}

impl DnsReport {
    pub fn group(&self, operator: &str, class: ResolverClass) -> Option<&DnsGroup> {
        self.groups
            .iter()
            .find(|g| g.operator == operator && g.resolver_class == class)
    }

    /// Zero for an operator that has lookups but none of this class.
    pub fn usage_share(&self, operator: &str, class: ResolverClass) -> Option<f64> {
        if !self.groups.iter().any(|g| g.operator == operator) {
            return None;
        }
        Some(self.group(operator, class).map_or(0.0, |g| g.usage_share))
    }
}

pub fn dns_report(ds: &Dataset) -> DnsReport {
    let mut groups: BTreeMap<(String, ResolverClass), (usize, Vec<f64>)> = BTreeMap::new();
    let mut per_operator: BTreeMap<String, usize> = BTreeMap::new();
    for r in &ds.records {
        let Payload::Dns(d) = &r.payload else { continue };
        let operator = ds.network(r).operator_name.clone();
        *per_operator.entry(operator.clone()).or_default() += 1;
        let g = groups.entry((operator, d.resolver_class)).or_default();
        g.0 += 1;
        if d.success {
            g.1.push(d.lookup_ms);
        }
    }
    let groups = groups
        .into_iter()
        .map(|((operator, resolver_class), (lookups, times))| DnsGroup {
            usage_share: lookups as f64 / per_operator[&operator] as f64,
            lookup_ms: box_stats(&times).ok(),
            operator,
            resolver_class,
            lookups,
        })
        .collect();
    DnsReport { groups }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdnStatusGroup {
    pub cdn: String,
    pub edge_status: CacheStatus,
    pub total_ms: BoxStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdnContinentGroup {
    pub cdn: String,
    pub continent: Continent,
    pub total_ms: BoxStats,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CdnReport {
    /// Hit and Miss only.
    pub by_status: Vec<CdnStatusGroup>,
    /// Edge hits only.
    pub by_continent: Vec<CdnContinentGroup>,
    /// Median miss time over median hit time, for CDNs with both.
    pub miss_penalty: BTreeMap<String, f64>,
}

impl CdnReport {
    pub fn status(&self, cdn: &str, status: CacheStatus) -> Option<&BoxStats> {
        self.by_status
            .iter()
            .find(|g| g.cdn == cdn && g.edge_status == status)
            .map(|g| &g.total_ms)
    }

    pub fn continent(&self, cdn: &str, continent: Continent) -> Option<&BoxStats> {
        self.by_continent
            .iter()
            .find(|g| g.cdn == cdn && g.continent == continent)
            .map(|g| &g.total_ms)
    }
}

/// Download times of successful fetches. Responses without a usable cache
/// header are left out of the medians; cache_probability still counts them.
pub fn cdn_report(ds: &Dataset) -> CdnReport {
    let mut by_status: BTreeMap<(String, CacheStatus), Vec<f64>> = BTreeMap::new();
    let mut by_continent: BTreeMap<(String, Continent), Vec<f64>> = BTreeMap::new();
    for r in &ds.records {
        let Payload::Cdn(c) = &r.payload else { continue };
        if !c.is_success() || c.edge_status == CacheStatus::Unknown {
            continue;
        }
        by_status
            .entry((c.cdn_name.clone(), c.edge_status))
            .or_default()
            .push(c.total_ms);
        if c.edge_status == CacheStatus::Hit {
            by_continent
                .entry((c.cdn_name.clone(), ds.network(r).continent))
                .or_default()
                .push(c.total_ms);
        }
    }
    let by_status: Vec<CdnStatusGroup> = by_status
        .into_iter()
        .map(|((cdn, edge_status), v)| CdnStatusGroup {
            cdn,
            edge_status,
            total_ms: box_stats(&v).expect("groups are non-empty"),
        })
        .collect();
    let by_continent = by_continent
        .into_iter()
        .map(|((cdn, continent), v)| CdnContinentGroup {
            cdn,
            continent,
            total_ms: box_stats(&v).expect("groups are non-empty"),
        })
        .collect();
    let mut report = CdnReport {
        by_status,
        by_continent,
        miss_penalty: BTreeMap::new(),
    };
    let cdns: std::collections::BTreeSet<String> =
        report.by_status.iter().map(|g| g.cdn.clone()).collect();
    for cdn in cdns {
        if let (Some(hit), Some(miss)) = (
            report.status(&cdn, CacheStatus::Hit),
            report.status(&cdn, CacheStatus::Miss),
        ) {
            if hit.median > 0.0 {
                let ratio = miss.median / hit.median;
                report.miss_penalty.insert(cdn, ratio);
            }
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRow {
    pub network_id: String,
    pub cdn: String,
    pub n: usize,
    pub p_hit: f64,
    pub p_miss: f64,
    pub p_unknown: f64,
}

/// Edge status distribution of successful fetches per network and CDN.
pub fn cache_probability(ds: &Dataset) -> Vec<CacheRow> {
    let mut counts: BTreeMap<(String, String), [usize; 3]> = BTreeMap::new();
    for r in &ds.records {
        let Payload::Cdn(c) = &r.payload else { continue };
        if !c.is_success() {
            continue;
        }
        let slot = match c.edge_status {
            CacheStatus::Hit => 0,
            CacheStatus::Miss => 1,
            CacheStatus::Unknown => 2,
        };
        counts
            .entry((r.network_id.clone(), c.cdn_name.clone()))
            .or_default()[slot] += 1;
    }
    counts
        .into_iter()
        .map(|((network_id, cdn), [hit, miss, unknown])| {
            let n = hit + miss + unknown;
            CacheRow {
                network_id,
                cdn,
                n,
                p_hit: hit as f64 / n as f64,
                p_miss: miss as f64 / n as f64,
                p_unknown: unknown as f64 / n as f64,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YoutubeNetwork {
    pub network_id: String,
    pub samples: usize,
    /// Every resolution is present, zero when never seen.
    pub shares: BTreeMap<Resolution, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct YoutubeReport {
    pub networks: Vec<YoutubeNetwork>,
    /// Per resolution, the CDF of per-network shares. Empty when no network
    /// has samples.
    pub cdfs: BTreeMap<Resolution, CdfSeries>,
}

pub fn youtube_resolution_report(ds: &Dataset) -> YoutubeReport {
    let mut counts: BTreeMap<&str, BTreeMap<Resolution, usize>> = BTreeMap::new();
    for r in &ds.records {
        let Payload::Youtube(y) = &r.payload else { continue };
        if y.samples.is_empty() {
            continue;
        }
        let per = counts.entry(r.network_id.as_str()).or_default();
        for s in &y.samples {
            *per.entry(s.resolution).or_default() += 1;
        }
    }
    let networks: Vec<YoutubeNetwork> = counts
        .into_iter()
        .map(|(id, per)| {
            let samples: usize = per.values().sum();
            let shares = Resolution::ALL
                .iter()
                .map(|res| {
                    let k = per.get(res).copied().unwrap_or(0);
                    (*res, k as f64 / samples as f64)
                })
                .collect();
            YoutubeNetwork {
                network_id: id.to_string(),
                samples,
                shares,
            }
        })
        .collect();
    let mut cdfs = BTreeMap::new();
    for res in Resolution::ALL {
        let fractions: BTreeMap<String, f64> = networks
            .iter()
            .map(|n| (n.network_id.clone(), n.shares[&res]))
            .collect();
        if let Ok(series) = crux_cdf(&fractions) {
            cdfs.insert(res, series);
        }
    }
    YoutubeReport { networks, cdfs }
}
