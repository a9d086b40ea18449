// SPDX-License-Identifier: MIT OR Apache-2.0

use std::io::Write;
use std::path::Path;

use serde::{Serialize, Serializer};

use crate::error::Result;

/// A log-scale value. Finite values are plain JSON numbers; infinities are
/// written as the strings `"-inf"` and `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Log(pub f64);

impl Serialize for Log {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            v if v.is_finite() => s.serialize_f64(v),
            v if v == f64::NEG_INFINITY => s.serialize_str("-inf"),
            v if v == f64::INFINITY => s.serialize_str("inf"),
            _ => s.serialize_str("nan"),
        }
    }
}

pub fn logs(values: &[f64]) -> Vec<Log> {
    values.iter().copied().map(Log).collect()
}

pub fn to_json<T: Serialize>(doc: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(doc).expect("documents serialize");
    bytes.push(b'\n');
    bytes
}

/// Rows of plain cells. `None` becomes an empty cell.
pub fn to_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<Option<String>>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row.iter().map(|c| c.as_deref().unwrap_or("")))
            .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn num(v: f64) -> Option<String> {
    Some(format!("{v}"))
}

/// Writes to `path` through a temporary file in the same directory, or to
/// stdout.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    let Some(path) = path else {
        let mut out = std::io::stdout().lock();
        out.write_all(bytes)?;
        return Ok(out.flush()?);
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
