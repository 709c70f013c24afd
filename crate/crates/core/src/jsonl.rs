//! Line-delimited JSON helpers shared by the server log, agent spools and
//! the analysis loader.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

/// Serializes `value` as one line including the trailing newline, so a
/// single `write_all` appends a whole entry.
pub fn to_line<T: Serialize>(value: &T) -> serde_json::Result<Vec<u8>> {
    let mut buf = serde_json::to_vec(value)?;
    buf.push(b'\n');
    Ok(buf)
}

pub fn write_all<T: Serialize, W: Write>(mut out: W, values: &[T]) -> std::io::Result<()> {
    for v in values {
        out.write_all(&to_line(v)?)?;
    }
    out.flush()
}

/// Parses every complete line. A final line without a terminating newline is
/// a torn append and is reported through `torn_tail` instead of as an error.
pub fn read_lines<T: DeserializeOwned, R: BufRead>(
    mut input: R,
) -> Result<JsonlContents<T>, JsonlError> {
    let mut values = Vec::new();
    let mut torn_tail = false;
    let mut line = String::new();
    let mut number = 0;
    loop {
        line.clear();
        let n = input.read_line(&mut line)?;
        if n == 0 {
            break;
        }
        number += 1;
        if !line.ends_with('\n') {
            torn_tail = true;
            break;
        }
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let value = serde_json::from_str(trimmed).map_err(|source| JsonlError::Parse {
            line: number,
            source,
        })?;
        values.push(value);
    }
    Ok(JsonlContents { values, torn_tail })
}

#[derive(Debug)]
pub struct JsonlContents<T> {
    pub values: Vec<T>,
    pub torn_tail: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum JsonlError {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
