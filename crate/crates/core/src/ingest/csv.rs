//! Frame-per-row CSV reading and writing.
//!
//! The canonical layout is
//! `timestamp,link_id,label,a_0,...,a_89,p_0,...,p_89` with a mandatory header:
//! amplitudes then phases, row-major antenna × subcarrier. Floats are written
//! in shortest round-trip form, so `load_csv(write_csv(x)) == x` bit for bit.
//!
//! Files in other layouts go through a [`ColumnMap`], which says where each
//! field lives and supplies fixed values for fields the file does not carry.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data_model::{ActivityLabel, CsiFrame, Recording, DEFAULT_RX, DEFAULT_SUBCARRIERS};
use crate::error::{Error, Result};

/// A recording together with the activity it was captured under.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRecording {
    pub recording: Recording,
    pub label: ActivityLabel,
}

/// Where to find each field in a foreign CSV layout. Column indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub delimiter: char,
    pub has_header: bool,
    pub n_rx: usize,
    pub n_sub: usize,
    pub timestamp_col: usize,
    /// Multiplier turning the timestamp column into seconds.
    pub timestamp_scale: f64,
    pub link_col: Option<usize>,
    /// Link id used when `link_col` is absent.
    pub fixed_link: u32,
    pub label_col: Option<usize>,
    /// Label used when `label_col` is absent, e.g. for one-file-per-activity dumps.
    pub fixed_label: Option<String>,
    pub amplitude_start: usize,
    pub phase_start: Option<usize>,
    /// Sample rate used when a run has a single frame and none can be inferred.
    pub fallback_rate_hz: f64,
}

impl Default for ColumnMap {
    fn default() -> Self {
        let d = DEFAULT_RX * DEFAULT_SUBCARRIERS;
        Self {
            delimiter: ',',
            has_header: true,
            n_rx: DEFAULT_RX,
            n_sub: DEFAULT_SUBCARRIERS,
            timestamp_col: 0,
            timestamp_scale: 1.0,
            link_col: Some(1),
            fixed_link: 0,
            label_col: Some(2),
            fixed_label: None,
            amplitude_start: 3,
            phase_start: Some(3 + d),
            fallback_rate_hz: 1000.0,
        }
    }
}

impl ColumnMap {
    fn channels(&self) -> usize {
        self.n_rx * self.n_sub
    }

    fn is_canonical(&self) -> bool {
        *self == ColumnMap { fallback_rate_hz: self.fallback_rate_hz, ..ColumnMap::default() }
    }

    fn min_columns(&self) -> usize {
        let d = self.channels();
        let mut n = self.timestamp_col + 1;
        n = n.max(self.amplitude_start + d);
        if let Some(p) = self.phase_start {
            n = n.max(p + d);
        }
        if let Some(c) = self.link_col {
            n = n.max(c + 1);
        }
        if let Some(c) = self.label_col {
            n = n.max(c + 1);
        }
        n
    }
}

pub fn canonical_header(n_channels: usize) -> String {
    let mut h = String::from("timestamp,link_id,label");
    for k in 0..n_channels {
        let _ = write!(h, ",a_{k}");
    }
    for k in 0..n_channels {
        let _ = write!(h, ",p_{k}");
    }
    h
}

/// Load a canonical-layout file.
pub fn load_csv(path: &Path) -> Result<Vec<LabeledRecording>> {
    load_mapped(path, &ColumnMap::default())
}

pub fn load_mapped(path: &Path, map: &ColumnMap) -> Result<Vec<LabeledRecording>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mapped(&text, map)
}

struct Row {
    timestamp: f64,
    link: u32,
    label: ActivityLabel,
    frame: CsiFrame,
}

/// Parse CSV text. A new recording starts whenever the `(link_id, label)` pair
/// changes or the timestamp fails to increase.
pub fn parse_mapped(text: &str, map: &ColumnMap) -> Result<Vec<LabeledRecording>> {
    let d = map.channels();
    if d == 0 {
        return Err(Error::Schema("column map declares zero channels".into()));
    }
    let fixed_label = match (&map.label_col, &map.fixed_label) {
        (Some(_), _) => None,
        (None, Some(name)) => Some(name.parse::<ActivityLabel>()?),
        (None, None) => return Err(Error::Schema("no label column and no fixed label".into())),
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let expected_cols = if map.is_canonical() { Some(3 + 2 * d) } else { None };

    if map.has_header {
        let (_, header) = lines.next().ok_or_else(|| Error::Schema("missing header row".into()))?;
        let n = header.split(map.delimiter).count();
        if let Some(expected) = expected_cols {
            if n != expected || header.trim() != canonical_header(d) {
                return Err(Error::Schema(format!(
                    "header has {n} columns, expected {expected} (`timestamp,link_id,label,a_0..a_{},p_0..p_{}`)",
                    d - 1,
                    d - 1
                )));
            }
        } else if n < map.min_columns() {
            return Err(Error::Schema(format!(
                "header has {n} columns, the column map needs {}",
                map.min_columns()
            )));
        }
    }

    let mut rows = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let fields: Vec<&str> = line.split(map.delimiter).map(str::trim).collect();
        match expected_cols {
            Some(expected) if fields.len() != expected => {
                return Err(Error::Schema(format!(
                    "line {lineno}: {} columns, expected {expected}",
                    fields.len()
                )))
            }
            None if fields.len() < map.min_columns() => {
                return Err(Error::Schema(format!(
                    "line {lineno}: {} columns, the column map needs {}",
                    fields.len(),
                    map.min_columns()
                )))
            }
            _ => {}
        }
        let num = |col: usize| -> Result<f64> {
            fields[col].parse::<f64>().map_err(|_| Error::Parse {
                line: lineno,
                reason: format!("column {col}: `{}` is not a number", fields[col]),
            })
        };
        let timestamp = num(map.timestamp_col)? * map.timestamp_scale;
        let link = match map.link_col {
            Some(c) => fields[c].parse::<u32>().map_err(|_| Error::Parse {
                line: lineno,
                reason: format!("link id `{}` is not a non-negative integer", fields[c]),
            })?,
            None => map.fixed_link,
        };
        let label = match (map.label_col, fixed_label) {
            (Some(c), _) => fields[c].parse::<ActivityLabel>().map_err(|e| Error::Parse {
                line: lineno,
                reason: e.to_string(),
            })?,
            (None, Some(l)) => l,
            (None, None) => unreachable!(),
        };
        let amplitude = (0..d).map(|k| num(map.amplitude_start + k)).collect::<Result<Vec<_>>>()?;
        let phase = match map.phase_start {
            Some(p) => (0..d).map(|k| num(p + k)).collect::<Result<Vec<_>>>()?,
            None => vec![0.0; d],
        };
        let frame = CsiFrame::from_polar(timestamp, map.n_rx, map.n_sub, amplitude, phase)
            .map_err(|e| Error::Parse { line: lineno, reason: e.to_string() })?;
        rows.push(Row { timestamp, link, label, frame });
    }

    let mut out = Vec::new();
    let mut run: Vec<Row> = Vec::new();
    for row in rows {
        let breaks = run.last().is_some_and(|prev| {
            prev.link != row.link || prev.label != row.label || row.timestamp <= prev.timestamp
        });
        if breaks {
            out.push(finish_run(std::mem::take(&mut run), map.fallback_rate_hz)?);
        }
        run.push(row);
    }
    if !run.is_empty() {
        out.push(finish_run(run, map.fallback_rate_hz)?);
    }
    Ok(out)
}

fn finish_run(run: Vec<Row>, fallback_rate_hz: f64) -> Result<LabeledRecording> {
    let link = run[0].link;
    let label = run[0].label;
    let rate = infer_sample_rate(&run.iter().map(|r| r.timestamp).collect::<Vec<_>>())
        .unwrap_or(fallback_rate_hz);
    let frames = run.into_iter().map(|r| r.frame).collect();
    Ok(LabeledRecording { recording: Recording::new(frames, rate, link)?, label })
}

/// Rate from the median timestamp step, rounded to 1e-6 Hz.
fn infer_sample_rate(timestamps: &[f64]) -> Option<f64> {
    let mut steps: Vec<f64> = timestamps.windows(2).map(|w| w[1] - w[0]).collect();
    if steps.is_empty() {
        return None;
    }
    steps.sort_by(f64::total_cmp);
    let median = steps[steps.len() / 2];
    Some(((1.0 / median) * 1e6).round() / 1e6)
}

/// Render recordings in the canonical layout.
pub fn to_csv_string(recordings: &[LabeledRecording]) -> Result<String> {
    let d = recordings.first().map_or(DEFAULT_RX * DEFAULT_SUBCARRIERS, |r| r.recording.channels());
    let mut s = canonical_header(d);
    s.push('\n');
    for lr in recordings {
        if lr.recording.channels() != d && !lr.recording.is_empty() {
            return Err(Error::Schema("recordings disagree on channel count".into()));
        }
        for f in lr.recording.frames() {
            let _ = write!(s, "{},{},{}", f.timestamp(), lr.recording.link_id(), lr.label);
            for v in f.amplitude().iter().chain(f.phase()) {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
    }
    Ok(s)
}

pub fn write_csv(path: &Path, recordings: &[LabeledRecording]) -> Result<()> {
    crate::archive::write_atomic(path, to_csv_string(recordings)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: &str, link: u32, label: &str, amp: f64) -> String {
        let mut s = format!("{t},{link},{label}");
        for _ in 0..90 {
            let _ = write!(s, ",{amp}");
        }
        for _ in 0..90 {
            s.push_str(",0");
        }
        s
    }

    fn file(rows: &[String]) -> String {
        let mut s = canonical_header(90);
        for r in rows {
            s.push('\n');
            s.push_str(r);
        }
        s
    }

    #[test]
    fn minimal_file() {
        let text = file(&[row("0", 0, "walk", 1.0), row("0.001", 0, "walk", 2.0)]);
        let recs = parse_mapped(&text, &ColumnMap::default()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].recording.len(), 2);
        assert_eq!(recs[0].recording.sample_rate_hz(), 1000.0);
        assert_eq!(recs[0].label, ActivityLabel::Walk);
        assert_eq!(recs[0].recording.frames()[1].amplitude()[89], 2.0);
    }

    #[test]
    fn runs_split_on_link_label_and_time_reset() {
        let text = file(&[
            row("0", 0, "walk", 1.0),
            row("0.001", 0, "walk", 1.0),
            row("0.002", 1, "walk", 1.0),
            row("0.003", 1, "run", 1.0),
            row("0", 1, "run", 1.0),
        ]);
        let recs = parse_mapped(&text, &ColumnMap::default()).unwrap();
        let lens: Vec<usize> = recs.iter().map(|r| r.recording.len()).collect();
        assert_eq!(lens, vec![2, 1, 1, 1]);
    }

    #[test]
    fn wrong_arity_is_schema_error() {
        let mut header = String::from("timestamp,link_id,label");
        for k in 0..89 {
            let _ = write!(header, ",a_{k}");
        }
        for k in 0..90 {
            let _ = write!(header, ",p_{k}");
        }
        let text = format!("{header}\n");
        assert!(matches!(parse_mapped(&text, &ColumnMap::default()), Err(Error::Schema(_))));

        let mut short = row("0", 0, "walk", 1.0);
        short.truncate(short.rfind(',').unwrap());
        assert!(matches!(
            parse_mapped(&file(&[short]), &ColumnMap::default()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn malformed_value_reports_line() {
        let bad = row("0", 0, "walk", 1.0).replacen(",1,", ",x,", 1);
        let err = parse_mapped(&file(&[row("0", 0, "walk", 1.0), bad]), &ColumnMap::default());
        assert!(matches!(err, Err(Error::Parse { line: 3, .. })), "{err:?}");
        let bad_label = row("0", 0, "juggle", 1.0);
        assert!(matches!(
            parse_mapped(&file(&[bad_label]), &ColumnMap::default()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn foreign_layout_through_column_map() {
        // microsecond timestamps, amplitudes only, one activity per file
        let mut text = String::new();
        for i in 0..3 {
            let _ = write!(text, "{}", i * 1000);
            for _ in 0..90 {
                text.push_str(";4.5");
            }
            text.push('\n');
        }
        let map = ColumnMap {
            delimiter: ';',
            has_header: false,
            timestamp_scale: 1e-6,
            link_col: None,
            label_col: None,
            fixed_label: Some("bed".into()),
            amplitude_start: 1,
            phase_start: None,
            ..ColumnMap::default()
        };
        let recs = parse_mapped(&text, &map).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].label, ActivityLabel::LieDown);
        assert_eq!(recs[0].recording.len(), 3);
        assert_eq!(recs[0].recording.frames()[2].amplitude()[0], 4.5);
    }
}
