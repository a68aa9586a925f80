use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quality flag attached to every cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quality {
    Observed,
    Missing,
    Abnormal,
    Imputed,
}

/// One channel value at one timestamp. A missing cell carries no payload.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "flag", content = "value", rename_all = "lowercase")]
pub enum Cell {
    Observed(f64),
    Missing,
    Abnormal(f64),
    Imputed(f64),
}

impl Cell {
    pub fn value(&self) -> Option<f64> {
        match *self {
            Cell::Observed(v) | Cell::Abnormal(v) | Cell::Imputed(v) => Some(v),
            Cell::Missing => None,
        }
    }

    pub fn quality(&self) -> Quality {
        match self {
            Cell::Observed(_) => Quality::Observed,
            Cell::Missing => Quality::Missing,
            Cell::Abnormal(_) => Quality::Abnormal,
            Cell::Imputed(_) => Quality::Imputed,
        }
    }

    /// Usable for fitting and windowing: observed or imputed.
    pub fn clean_value(&self) -> Option<f64> {
        match *self {
            Cell::Observed(v) | Cell::Imputed(v) => Some(v),
            _ => None,
        }
    }

    /// Same flag, new payload. Missing stays missing.
    pub fn map(self, f: impl FnOnce(f64) -> f64) -> Cell {
        match self {
            Cell::Observed(v) => Cell::Observed(f(v)),
            Cell::Abnormal(v) => Cell::Abnormal(f(v)),
            Cell::Imputed(v) => Cell::Imputed(f(v)),
            Cell::Missing => Cell::Missing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitoringFrame {
    /// Epoch seconds.
    pub timestamp: i64,
    pub cells: Vec<Cell>,
}

/// An ordered run of frames sharing one channel list.
///
/// Construction validates the invariants: strictly increasing timestamps,
/// one cell per channel in every frame, finite payloads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitoringSeries {
    channels: Vec<String>,
    frames: Vec<MonitoringFrame>,
}

impl MonitoringSeries {
    pub fn new(channels: Vec<String>, frames: Vec<MonitoringFrame>) -> Result<Self> {
        for (i, a) in channels.iter().enumerate() {
            if channels[..i].contains(a) {
                return Err(Error::Schema(format!("duplicate channel `{a}`")));
            }
        }
        for (row, frame) in frames.iter().enumerate() {
            if frame.cells.len() != channels.len() {
                return Err(Error::Schema(format!(
                    "row {row} has {} cells, expected {}",
                    frame.cells.len(),
                    channels.len()
                )));
            }
            if frame.cells.iter().any(|c| c.value().is_some_and(|v| !v.is_finite())) {
                return Err(Error::Schema(format!("row {row} carries a non-finite value")));
            }
            if row > 0 && frame.timestamp <= frames[row - 1].timestamp {
                return Err(Error::Ordering {
                    row,
                    timestamp: frame.timestamp,
                });
            }
        }
        Ok(Self { channels, frames })
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn frames(&self) -> &[MonitoringFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn channel_index(&self, id: &str) -> Result<usize> {
        self.channels
            .iter()
            .position(|c| c == id)
            .ok_or_else(|| Error::Schema(format!("unknown channel `{id}`")))
    }

    pub fn column(&self, channel: usize) -> Vec<Cell> {
        self.frames.iter().map(|f| f.cells[channel]).collect()
    }

    pub fn timestamps(&self) -> Vec<i64> {
        self.frames.iter().map(|f| f.timestamp).collect()
    }

    /// Replaces one column. Payloads are checked for finiteness.
    pub fn with_column(&self, channel: usize, cells: &[Cell]) -> Result<Self> {
        if cells.len() != self.frames.len() {
            return Err(Error::Schema(format!(
                "column has {} cells, series has {} frames",
                cells.len(),
                self.frames.len()
            )));
        }
        if let Some(row) = cells.iter().position(|c| c.value().is_some_and(|v| !v.is_finite())) {
            return Err(Error::Schema(format!("row {row} carries a non-finite value")));
        }
        let mut out = self.clone();
        for (frame, cell) in out.frames.iter_mut().zip(cells) {
            frame.cells[channel] = *cell;
        }
        Ok(out)
    }

    /// Restricts the series to a subset of channels, in the given order.
    pub fn select(&self, ids: &[&str]) -> Result<Self> {
        let idx = ids
            .iter()
            .map(|id| self.channel_index(id))
            .collect::<Result<Vec<_>>>()?;
        let frames = self
            .frames
            .iter()
            .map(|f| MonitoringFrame {
                timestamp: f.timestamp,
                cells: idx.iter().map(|&i| f.cells[i]).collect(),
            })
            .collect();
        Self::new(ids.iter().map(|s| s.to_string()).collect(), frames)
    }

    pub fn count_quality(&self, quality: Quality) -> usize {
        self.frames
            .iter()
            .flat_map(|f| &f.cells)
            .filter(|c| c.quality() == quality)
            .count()
    }
}

fn parse_timestamp(raw: &str) -> Option<i64> {
    let raw = raw.trim();
    if let Ok(v) = raw.parse::<i64>() {
        return Some(v);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp())
}

fn parse_cell(raw: &str) -> Cell {
    match raw.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Cell::Observed(v),
        _ => Cell::Missing,
    }
}

/// Reads monitoring CSV from any reader. `schema` lists the expected channel
/// columns after `timestamp`, in order.
pub fn read_csv<R: Read>(reader: R, schema: &[&str]) -> Result<MonitoringSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let expected: Vec<String> = std::iter::once("timestamp")
        .chain(schema.iter().copied())
        .map(String::from)
        .collect();
    if header != expected {
        return Err(Error::Schema(format!(
            "header {header:?} does not match schema {expected:?}"
        )));
    }
    let mut frames = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let timestamp = parse_timestamp(&record[0]).ok_or_else(|| {
            Error::Schema(format!("row {row}: unparseable timestamp `{}`", &record[0]))
        })?;
        let cells = record.iter().skip(1).map(parse_cell).collect();
        frames.push(MonitoringFrame { timestamp, cells });
    }
    MonitoringSeries::new(schema.iter().map(|s| s.to_string()).collect(), frames)
}

/// Reads the header only, returning the channel list.
pub fn read_schema(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|_| Error::NotFound(path.to_path_buf()))?;
    let mut rdr = csv::Reader::from_reader(file);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    match header.split_first() {
        Some((first, rest)) if first == "timestamp" => Ok(rest.to_vec()),
        _ => Err(Error::Schema("first column must be `timestamp`".into())),
    }
}

pub fn ingest_csv(path: &Path, schema: &[&str]) -> Result<MonitoringSeries> {
    let file = File::open(path).map_err(|_| Error::NotFound(path.to_path_buf()))?;
    read_csv(file, schema)
}

/// Reads a CSV whose channel list is taken from its own header.
pub fn ingest_csv_auto(path: &Path) -> Result<MonitoringSeries> {
    let schema = read_schema(path)?;
    let refs: Vec<&str> = schema.iter().map(String::as_str).collect();
    ingest_csv(path, &refs)
}

/// Writes the series as CSV: integer epoch timestamps, shortest round-trip
/// float formatting, empty cells for missing values. Flags other than
/// `missing` are not representable and are dropped.
pub fn write_csv<W: Write>(series: &MonitoringSeries, writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let mut header = vec!["timestamp".to_string()];
    header.extend(series.channels.iter().cloned());
    wtr.write_record(&header)?;
    for frame in &series.frames {
        let mut rec = Vec::with_capacity(frame.cells.len() + 1);
        rec.push(frame.timestamp.to_string());
        rec.extend(
            frame
                .cells
                .iter()
                .map(|c| c.value().map(|v| format!("{v:?}")).unwrap_or_default()),
        );
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blank_cell_is_flagged_missing() {
        let text = "timestamp,a,b\n0,1.0,2.0\n7200,,2.5\n14400,1.2,2.6\n";
        let s = read_csv(text.as_bytes(), &["a", "b"]).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.count_quality(Quality::Missing), 1);
        assert_eq!(s.frames()[1].cells[0], Cell::Missing);
    }

    #[test]
    fn time_reversed_rows_are_an_ordering_error() {
        let text = "timestamp,a\n14400,1\n7200,2\n0,3\n";
        assert!(matches!(
            read_csv(text.as_bytes(), &["a"]),
            Err(Error::Ordering { row: 1, .. })
        ));
    }

    #[test]
    fn duplicate_timestamp_is_an_ordering_error() {
        let text = "timestamp,a\n0,1\n0,2\n";
        assert!(matches!(read_csv(text.as_bytes(), &["a"]), Err(Error::Ordering { .. })));
    }

    #[test]
    fn header_mismatch_is_a_schema_error() {
        let text = "timestamp,a,c\n0,1,2\n";
        assert!(matches!(read_csv(text.as_bytes(), &["a", "b"]), Err(Error::Schema(_))));
    }

    #[test]
    fn iso_timestamps_parse_to_epoch() {
        let text = "timestamp,a\n2018-03-18T00:00:00Z,1\n2018-03-18 02:00:00,2\n";
        let s = read_csv(text.as_bytes(), &["a"]).unwrap();
        assert_eq!(s.timestamps(), vec![1521331200, 1521331200 + 7200]);
    }

    #[test]
    fn unparseable_numbers_become_missing() {
        let text = "timestamp,a\n0,abc\n1,NaN\n2,3\n";
        let s = read_csv(text.as_bytes(), &["a"]).unwrap();
        assert_eq!(s.count_quality(Quality::Missing), 2);
    }

    #[test]
    fn write_then_read_is_bit_identical() {
        let frames = (0..10)
            .map(|i| MonitoringFrame {
                timestamp: i * 7200,
                cells: vec![
                    Cell::Observed(4.57 + (i as f64 * 0.1).sin() / 3.0),
                    if i == 4 { Cell::Missing } else { Cell::Observed(1e-7 * i as f64) },
                ],
            })
            .collect();
        let s = MonitoringSeries::new(vec!["no8".into(), "rainfall".into()], frames).unwrap();
        let mut buf = Vec::new();
        write_csv(&s, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &["no8", "rainfall"]).unwrap();
        assert_eq!(back, s);
        let mut buf2 = Vec::new();
        write_csv(&back, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }
}
