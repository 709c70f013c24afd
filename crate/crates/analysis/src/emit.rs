//! Writing the report to disk.
//!
//! Each section becomes `<section>.json` and/or `<section>.csv`, and
//! `manifest.json` lists the files with their data-row counts. CSV files
//! always carry a header row, even when the section is empty.
//!
//! CSV layouts:
//!
//! | section | columns |
//! |---|---|
//! | summary | kind, records |
//! | network_cdfs | metric, class, network_id, fraction, cdf |
//! | dns | operator, resolver_class, lookups, usage_share, then box columns |
//! | cdn | view, cdn, group, then box columns |
//! | cache_probability | network_id, cdn, n, p_hit, p_miss, p_unknown |
//! | youtube | network_id, samples, r144 … r1080 |
//!
//! Box columns are n, min, q1, median, q3, max, whisker_low, whisker_high,
//! outliers (a count); they are blank when a group has no values.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use amigo_core::Resolution;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{AnalysisError, Result};
use crate::reports::{
    cache_probability, cdn_report, dns_report, network_cdfs, summary, youtube_resolution_report,
    CacheRow, CdnReport, DnsReport, NetworkCdf, Summary, YoutubeReport,
};
use crate::stats::BoxStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown format {other:?}, expected json or csv")),
        }
    }
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

pub const SECTIONS: [&str; 6] = [
    "summary",
    "network_cdfs",
    "dns",
    "cdn",
    "cache_probability",
    "youtube",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub summary: Summary,
    pub network_cdfs: Vec<NetworkCdf>,
    pub dns: DnsReport,
    pub cdn: CdnReport,
    pub cache_probability: Vec<CacheRow>,
    pub youtube: YoutubeReport,
}

impl Report {
    pub fn build(ds: &Dataset) -> Self {
        Report {
            summary: summary(ds),
            network_cdfs: network_cdfs(ds),
            dns: dns_report(ds),
            cdn: cdn_report(ds),
            cache_probability: cache_probability(ds),
            youtube: youtube_resolution_report(ds),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub format: Format,
    /// Relative to the output directory.
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSection {
    pub name: String,
    pub rows: usize,
    pub files: Vec<ManifestFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub sections: Vec<ManifestSection>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn emit_report(ds: &Dataset, out_dir: &Path, formats: &[Format]) -> Result<Manifest> {
    let mut formats = formats.to_vec();
    formats.sort();
    formats.dedup();
    std::fs::create_dir_all(out_dir).map_err(|e| AnalysisError::io(out_dir, e))?;

    let report = Report::build(ds);
    let mut manifest = Manifest {
        sections: Vec::new(),
    };
    for name in SECTIONS {
        let table = csv_table(&report, name);
        let mut files = Vec::new();
        for format in &formats {
            let file = format!("{name}.{}", format.extension());
            let path = out_dir.join(&file);
            match format {
                Format::Json => write_json(&path, &section_json(&report, name)?)?,
                Format::Csv => write_csv(&path, &table)?,
            }
            files.push(ManifestFile {
                format: *format,
                path: file,
            });
        }
        manifest.sections.push(ManifestSection {
            name: name.to_string(),
            rows: table.rows.len(),
            files,
        });
    }
    let manifest_value = serde_json::to_value(&manifest).expect("manifest serializes");
    write_json(&out_dir.join(MANIFEST_FILE), &manifest_value)?;
    Ok(manifest)
}

fn section_json(report: &Report, name: &str) -> Result<serde_json::Value> {
    let v = match name {
        "summary" => serde_json::to_value(&report.summary),
        "network_cdfs" => serde_json::to_value(&report.network_cdfs),
        "dns" => serde_json::to_value(&report.dns),
        "cdn" => serde_json::to_value(&report.cdn),
        "cache_probability" => serde_json::to_value(&report.cache_probability),
        "youtube" => serde_json::to_value(&report.youtube),
        _ => unreachable!("unknown section {name}"),
    };
    Ok(v.expect("report types serialize"))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("json values serialize");
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(|e| AnalysisError::io(path, e))
}

struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

fn write_csv(path: &Path, table: &Table) -> Result<()> {
    let fail = |e: csv::Error| AnalysisError::Write {
        path: PathBuf::from(path),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    w.write_record(&table.header).map_err(fail)?;
    for row in &table.rows {
        w.write_record(row).map_err(fail)?;
    }
    w.flush().map_err(|e| AnalysisError::io(path, e))
}

const BOX_COLUMNS: [&str; 9] = [
    "n",
    "min",
    "q1",
    "median",
    "q3",
    "max",
    "whisker_low",
    "whisker_high",
    "outliers",
];

fn box_cells(b: Option<&BoxStats>) -> Vec<String> {
    match b {
        None => vec![String::new(); BOX_COLUMNS.len()],
        Some(b) => vec![
            b.n.to_string(),
            b.min.to_string(),
            b.q1.to_string(),
            b.median.to_string(),
            b.q3.to_string(),
            b.max.to_string(),
            b.whisker_low.to_string(),
            b.whisker_high.to_string(),
            b.outliers.len().to_string(),
        ],
    }
}

fn csv_table(report: &Report, name: &str) -> Table {
    match name {
        "summary" => Table {
            header: vec!["kind", "records"],
            rows: report
                .summary
                .by_kind
                .iter()
                .map(|(kind, n)| vec![kind.to_string(), n.to_string()])
                .collect(),
        },
        "network_cdfs" => Table {
            header: vec!["metric", "class", "network_id", "fraction", "cdf"],
            rows: report
                .network_cdfs
                .iter()
                .flat_map(|c| {
                    c.series.fractions.iter().map(move |(id, f)| {
                        vec![
                            c.selector.metric().to_string(),
                            c.selector.class_name().to_string(),
                            id.clone(),
                            f.to_string(),
                            c.series.cdf(*f).to_string(),
                        ]
                    })
                })
                .collect(),
        },
        "dns" => Table {
            header: [
                &["operator", "resolver_class", "lookups", "usage_share"][..],
                &BOX_COLUMNS[..],
            ]
            .concat(),
            rows: report
                .dns
                .groups
                .iter()
                .map(|g| {
                    let mut row = vec![
                        g.operator.clone(),
                        g.resolver_class.to_string(),
                        g.lookups.to_string(),
                        g.usage_share.to_string(),
                    ];
                    row.extend(box_cells(g.lookup_ms.as_ref()));
                    row
                })
                .collect(),
        },
        "cdn" => {
            let status = report.cdn.by_status.iter().map(|g| {
                ("edge_status", &g.cdn, g.edge_status.to_string(), &g.total_ms)
            });
            let continent = report.cdn.by_continent.iter().map(|g| {
                ("continent", &g.cdn, g.continent.to_string(), &g.total_ms)
            });
            Table {
                header: [&["view", "cdn", "group"][..], &BOX_COLUMNS[..]].concat(),
                rows: status
                    .chain(continent)
                    .map(|(view, cdn, group, stats)| {
                        let mut row = vec![view.to_string(), cdn.clone(), group];
                        row.extend(box_cells(Some(stats)));
                        row
                    })
                    .collect(),
            }
        }
        "cache_probability" => Table {
            header: vec!["network_id", "cdn", "n", "p_hit", "p_miss", "p_unknown"],
            rows: report
                .cache_probability
                .iter()
                .map(|r| {
                    vec![
                        r.network_id.clone(),
                        r.cdn.clone(),
                        r.n.to_string(),
                        r.p_hit.to_string(),
                        r.p_miss.to_string(),
                        r.p_unknown.to_string(),
                    ]
                })
                .collect(),
        },
        "youtube" => {
            let mut header = vec!["network_id", "samples"];
            header.extend(Resolution::ALL.iter().map(|r| r.as_str()));
            Table {
                header,
                rows: report
                    .youtube
                    .networks
                    .iter()
                    .map(|n| {
                        let mut row = vec![n.network_id.clone(), n.samples.to_string()];
                        row.extend(Resolution::ALL.iter().map(|r| n.shares[r].to_string()));
                        row
                    })
                    .collect(),
            }
        }
        _ => unreachable!("unknown section {name}"),
    }
}
