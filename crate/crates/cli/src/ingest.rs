// SPDX-License-Identifier: MIT OR Apache-2.0

//! CSV ingestion. One row per position, one column per replica track. An
//! empty cell or `NaN` marks a missing value; a first row that does not
//! parse as numbers is taken as a header.
//!
//! Rows are split by hand rather than through a CSV reader because a blank
//! line is meaningful here: it is a missing value in a one-column file.

use std::path::Path;

use bayescpd::{ObservedSequence, Track};

use crate::error::{CliError, Result};

fn cell(raw: &str) -> std::result::Result<Option<f64>, ()> {
    let s = raw.trim().trim_matches('"').trim();
    if s.is_empty() || s.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(()),
    }
}

/// Parses CSV text into tracks. `path` is only used in error messages.
pub fn parse_tracks(text: &str, path: &Path) -> Result<Vec<Track>> {
    let err = |line: usize, message: String| CliError::Ingest {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut tracks: Vec<Track> = Vec::new();
    let mut width = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        let cells: Vec<&str> = line.split(',').collect();
        let parsed: Vec<_> = cells.iter().map(|c| cell(c)).collect();
        if parsed.iter().any(Result::is_err) {
            if idx == 0 {
                width = Some(cells.len());
                continue;
            }
            let (col, raw) = cells
                .iter()
                .enumerate()
                .find(|(_, c)| cell(c).is_err())
                .expect("some cell failed");
            return Err(err(
                line_no,
                format!("column {}: {raw:?} is not a number", col + 1),
            ));
        }
        let expected = *width.get_or_insert(cells.len());
        if cells.len() != expected {
            return Err(err(
                line_no,
                format!("expected {expected} columns, found {}", cells.len()),
            ));
        }
        if tracks.is_empty() {
            tracks = vec![Vec::new(); expected];
        }
        for (track, value) in tracks.iter_mut().zip(parsed) {
            track.push(value.expect("checked above"));
        }
    }
    if tracks.is_empty() || tracks[0].is_empty() {
        return Err(err(1, "no data rows".into()));
    }
    for (r, track) in tracks.iter().enumerate() {
        if track.iter().all(Option::is_none) {
            return Err(err(1, format!("column {} has no observed values", r + 1)));
        }
    }
    Ok(tracks)
}

pub fn read_tracks(path: &Path) -> Result<Vec<Track>> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_tracks(&text, path)
}

/// Several files become replicas of one sequence (`concat = false`) or are
/// joined end to end (`concat = true`).
pub fn load_sequence(paths: &[impl AsRef<Path>], concat: bool) -> Result<ObservedSequence> {
    if paths.is_empty() {
        return Err(CliError::config("at least one --data file is required"));
    }
    let parts: Vec<Vec<Track>> = paths
        .iter()
        .map(|p| read_tracks(p.as_ref()))
        .collect::<Result<_>>()?;
    if concat {
        let seqs: Vec<ObservedSequence> = parts
            .into_iter()
            .map(ObservedSequence::new)
            .collect::<Result<_, _>>()?;
        return Ok(ObservedSequence::concat(&seqs)?);
    }
    let n = parts[0][0].len();
    for (p, part) in paths.iter().zip(&parts) {
        if part[0].len() != n {
            return Err(CliError::config(format!(
                "{} has {} rows but the first file has {n}; use --concat to join files end to end",
                p.as_ref().display(),
                part[0].len()
            )));
        }
    }
    Ok(ObservedSequence::new(
        parts.into_iter().flatten().collect(),
    )?)
}
