//! Parser for dumped "stats for nerds" player diagnostics.
//!
//! A log is a sequence of blocks. A block starts at a line holding an
//! RFC 3339 timestamp (bare, in brackets, or after `timestamp:`/`time:`)
//! and continues with `label: value` or `label value` lines. Recognized
//! labels, compared case-insensitively with punctuation ignored:
//!
//! * resolution: `Current / Optimal Res`, `Current Res`, `Resolution`
//! * buffer: `Buffer Health`
//! * dropped frames: `Dropped Frames`, `Frames`
//!
//! Resolution comes from the height of the first `WxH[@fps]` or `NNNp`
//! token. Blocks without a usable resolution or buffer health are skipped
//! and counted in [`YoutubeParse::skipped`]; missing dropped-frame counts
//! read as zero.

use amigo_core::{Resolution, YoutubeSample, YoutubeStatSeries};
use chrono::{DateTime, Utc};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct YoutubeParse {
    pub series: YoutubeStatSeries,
    pub skipped: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum YoutubeParseError {
    #[error("no timestamp or statistics label recognized in log")]
    Unparseable,
}

#[derive(Default)]
struct Block {
    start_line: usize,
    timestamp: Option<DateTime<Utc>>,
    resolution: Option<Result<Resolution, String>>,
    buffer_health_s: Option<f64>,
    dropped_frames: Option<u64>,
    has_stats: bool,
}

enum Label {
    Resolution,
    Buffer,
    Dropped,
}

fn normalize(label: &str) -> String {
    label
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

fn classify_label(label: &str) -> Option<Label> {
    let n = normalize(label);
    if n.starts_with("currentoptimalres") || n.starts_with("currentres") || n == "resolution" || n == "res" {
        Some(Label::Resolution)
    } else if n.starts_with("bufferhealth") || n == "buffer" {
        Some(Label::Buffer)
    } else if n.starts_with("droppedframes") || n == "frames" {
        Some(Label::Dropped)
    } else {
        None
    }
}

fn parse_timestamp_line(line: &str) -> Option<(DateTime<Utc>, &str)> {
    let mut rest = line.trim();
    for prefix in ["timestamp:", "time:"] {
        if rest.len() >= prefix.len() && rest[..prefix.len()].eq_ignore_ascii_case(prefix) {
            rest = rest[prefix.len()..].trim_start();
        }
    }
    let bracketed = rest.starts_with('[');
    let rest = rest.trim_start_matches('[');
    let end = if bracketed {
        rest.find(']')?
    } else {
        rest.find(char::is_whitespace).unwrap_or(rest.len())
    };
    let ts = DateTime::parse_from_rfc3339(rest[..end].trim()).ok()?;
    let tail = rest[end..].trim_start_matches(']').trim();
    Some((ts.with_timezone(&Utc), tail))
}

fn split_label(line: &str) -> (&str, &str) {
    if let Some(idx) = line.find(':') {
        return (&line[..idx], line[idx + 1..].trim());
    }
    // "Buffer Health 25.4 s": the value starts at the first token with a digit
    let mut offset = 0;
    for token in line.split_inclusive(char::is_whitespace) {
        if token.chars().any(|c| c.is_ascii_digit()) {
            return (&line[..offset], line[offset..].trim());
        }
        offset += token.len();
    }
    (line, "")
}

fn parse_height(value: &str) -> Option<u32> {
    for token in value.split(|c: char| c.is_whitespace() || c == '/' || c == ',') {
        let token = token.split('@').next().unwrap_or("");
        if let Some((w, h)) = token.split_once(['x', 'X']) {
            if !w.is_empty() && w.bytes().all(|b| b.is_ascii_digit()) {
                if let Ok(h) = h.parse() {
                    return Some(h);
                }
            }
        }
        if let Some(h) = token.strip_suffix(['p', 'P']) {
            if let Ok(h) = h.parse() {
                return Some(h);
            }
        }
    }
    None
}

fn first_number(value: &str) -> Option<f64> {
    let start = value.find(|c: char| c.is_ascii_digit())?;
    let tail = &value[start..];
    let end = tail
        .find(|c: char| !(c.is_ascii_digit() || c == '.'))
        .unwrap_or(tail.len());
    tail[..end].trim_end_matches('.').parse().ok()
}

impl Block {
    fn apply(&mut self, line: &str) -> bool {
        let (label, value) = split_label(line);
        let Some(kind) = classify_label(label) else {
            return false;
        };
        self.has_stats = true;
        match kind {
            Label::Resolution => {
                self.resolution = Some(match parse_height(value) {
                    Some(h) => Resolution::from_height(h).ok_or_else(|| format!("unsupported height {h}")),
                    None => Err(format!("no resolution in {value:?}")),
                });
            }
            Label::Buffer => self.buffer_health_s = first_number(value),
            Label::Dropped => self.dropped_frames = first_number(value).map(|v| v as u64),
        }
        true
    }

    fn finish(self, out: &mut YoutubeParse) {
        if !self.has_stats && self.timestamp.is_some() {
            out.skipped += 1;
            out.warnings.push(format!("line {}: block has no statistics", self.start_line));
            return;
        }
        if !self.has_stats {
            return;
        }
        let problem = match (&self.timestamp, &self.resolution, self.buffer_health_s) {
            (None, _, _) => Some("statistics before any timestamp".to_string()),
            (_, None, _) => Some("missing resolution".to_string()),
            (_, Some(Err(e)), _) => Some(e.clone()),
            (_, _, None) => Some("missing buffer health".to_string()),
            _ => None,
        };
        if let Some(problem) = problem {
            out.skipped += 1;
            out.warnings.push(format!("line {}: {problem}", self.start_line));
            return;
        }
        out.series.samples.push(YoutubeSample {
            timestamp: self.timestamp.unwrap(),
            resolution: self.resolution.unwrap().unwrap(),
            buffer_health_s: self.buffer_health_s.unwrap(),
            dropped_frames: self.dropped_frames.unwrap_or(0),
        });
    }
}

pub fn parse_youtube_stats(log_text: &str) -> Result<YoutubeParse, YoutubeParseError> {
    let mut out = YoutubeParse {
        series: YoutubeStatSeries::default(),
        skipped: 0,
        warnings: Vec::new(),
    };
    let mut recognized = false;
    let mut block = Block {
        start_line: 1,
        ..Block::default()
    };
    for (i, raw) in log_text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some((ts, tail)) = parse_timestamp_line(line) {
            recognized = true;
            std::mem::take(&mut block).finish(&mut out);
            block = Block {
                start_line: i + 1,
                timestamp: Some(ts),
                ..Block::default()
            };
            if !tail.is_empty() {
                block.apply(tail);
            }
            continue;
        }
        recognized |= block.apply(line);
    }
    block.finish(&mut out);

    if !recognized && !log_text.trim().is_empty() {
        return Err(YoutubeParseError::Unparseable);
    }
    out.series.samples.sort_by_key(|s| s.timestamp);
    Ok(out)
}
