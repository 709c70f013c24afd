//! Durable FIFO of records awaiting upload: one JSONL file per UTC day.

use std::collections::VecDeque;
use std::fs::OpenOptions;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use amigo_core::jsonl;
use amigo_core::MeasurementRecord;

use crate::error::AgentError;

pub struct Spool {
    dir: PathBuf,
    queue: VecDeque<(String, MeasurementRecord)>,
}

fn io(context: String) -> impl FnOnce(std::io::Error) -> AgentError {
    move |source| AgentError::Io { context, source }
}

fn file_name(r: &MeasurementRecord) -> String {
    format!("spool-{}.jsonl", r.timestamp.format("%Y-%m-%d"))
}

impl Spool {
    /// Loads any spool files left in `dir`, oldest day first. A torn final
    /// line (crash mid-append) is dropped.
    pub fn open(dir: &Path) -> Result<Self, AgentError> {
        std::fs::create_dir_all(dir).map_err(io(format!("creating {}", dir.display())))?;
        let mut names: Vec<String> = std::fs::read_dir(dir)
            .map_err(io(format!("listing {}", dir.display())))?
            .flatten()
            .map(|e| e.file_name().to_string_lossy().to_string())
            .filter(|n| n.starts_with("spool-") && n.ends_with(".jsonl"))
            .collect();
        names.sort();
        let mut queue = VecDeque::new();
        for name in names {
            let path = dir.join(&name);
            let f = std::fs::File::open(&path).map_err(io(format!("opening {}", path.display())))?;
            let contents = jsonl::read_lines::<MeasurementRecord, _>(BufReader::new(f)).map_err(|e| {
                AgentError::Io {
                    context: format!("reading {}", path.display()),
                    source: std::io::Error::other(e.to_string()),
                }
            })?;
            if contents.torn_tail {
                tracing::warn!("dropping torn tail of {}", path.display());
            }
            let file = name.clone();
            queue.extend(contents.values.into_iter().map(|r| (file.clone(), r)));
            if contents.torn_tail {
                let keep: Vec<&MeasurementRecord> =
                    queue.iter().filter(|(f, _)| *f == file).map(|(_, r)| r).collect();
                rewrite(&path, keep)?;
            }
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            queue,
        })
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn push(&mut self, record: MeasurementRecord) -> Result<(), AgentError> {
        let name = file_name(&record);
        let path = self.dir.join(&name);
        let line = jsonl::to_line(&record).map_err(|e| AgentError::Io {
            context: "encoding record".into(),
            source: std::io::Error::other(e),
        })?;
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io(format!("opening {}", path.display())))?;
        f.write_all(&line).map_err(io(format!("appending to {}", path.display())))?;
        self.queue.push_back((name, record));
        Ok(())
    }

    /// The oldest `n` records, in order.
    pub fn peek(&self, n: usize) -> Vec<MeasurementRecord> {
        self.queue.iter().take(n).map(|(_, r)| r.clone()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &MeasurementRecord> {
        self.queue.iter().map(|(_, r)| r)
    }

    /// Drops the oldest `n` records and rewrites the files they came from.
    pub fn pop_front(&mut self, n: usize) -> Result<(), AgentError> {
        let mut touched: Vec<String> = Vec::new();
        for _ in 0..n.min(self.queue.len()) {
            if let Some((f, _)) = self.queue.pop_front() {
                if !touched.contains(&f) {
                    touched.push(f);
                }
            }
        }
        for name in touched {
            let path = self.dir.join(&name);
            let keep: Vec<&MeasurementRecord> =
                self.queue.iter().filter(|(f, _)| *f == name).map(|(_, r)| r).collect();
            if keep.is_empty() {
                match std::fs::remove_file(&path) {
                    Ok(()) => {}
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                    Err(e) => return Err(io(format!("removing {}", path.display()))(e)),
                }
            } else {
                rewrite(&path, keep)?;
            }
        }
        Ok(())
    }
}

fn rewrite(path: &Path, records: Vec<&MeasurementRecord>) -> Result<(), AgentError> {
    let tmp = path.with_extension("jsonl.tmp");
    let f = std::fs::File::create(&tmp).map_err(io(format!("creating {}", tmp.display())))?;
    jsonl::write_all(std::io::BufWriter::new(f), &records)
        .map_err(io(format!("writing {}", tmp.display())))?;
    std::fs::rename(&tmp, path).map_err(io(format!("replacing {}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use amigo_core::{DnsResult, ExperimentKind, Payload, RecordId, ResolverClass};

    fn record(id: &str, ts: &str) -> MeasurementRecord {
        MeasurementRecord {
            record_id: id.parse::<RecordId>().unwrap(),
            device_id: "me".into(),
            network_id: "n".into(),
            experiment_kind: ExperimentKind::Dns,
            timestamp: ts.parse().unwrap(),
            payload: Payload::Dns(DnsResult {
                domain: "example.com".into(),
                resolver_ip: "8.8.8.8".into(),
                resolver_class: ResolverClass::GoogleDns,
                lookup_ms: 20.0,
                success: true,
                answer: None,
                error: None,
            }),
        }
    }

    #[test]
    fn fifo_across_days_and_restarts() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Spool::open(dir.path()).unwrap();
        s.push(record("a", "2024-03-01T23:00:00Z")).unwrap();
        s.push(record("b", "2024-03-01T23:30:00Z")).unwrap();
        s.push(record("c", "2024-03-02T00:10:00Z")).unwrap();
        assert!(dir.path().join("spool-2024-03-02.jsonl").exists());
        s.pop_front(1).unwrap();
        let s = Spool::open(dir.path()).unwrap();
        let ids: Vec<_> = s.iter().map(|r| r.record_id.to_string()).collect();
        assert_eq!(ids, ["b", "c"]);
        let mut s = s;
        s.pop_front(2).unwrap();
        assert!(s.is_empty());
        assert!(!dir.path().join("spool-2024-03-01.jsonl").exists());
        assert!(Spool::open(dir.path()).unwrap().is_empty());
    }

    #[test]
    fn torn_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Spool::open(dir.path()).unwrap();
        s.push(record("a", "2024-03-01T10:00:00Z")).unwrap();
        let path = dir.path().join("spool-2024-03-01.jsonl");
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"record_id\":\"b\"").unwrap();
        let s = Spool::open(dir.path()).unwrap();
        assert_eq!(s.len(), 1);
        let mut s = s;
        s.push(record("c", "2024-03-01T11:00:00Z")).unwrap();
        assert_eq!(Spool::open(dir.path()).unwrap().len(), 2);
    }
}
