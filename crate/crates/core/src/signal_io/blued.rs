//! Reader for BLUED-style raw current files.
//!
//! Each file starts with a free-form instrument header terminated by a column
//! header row such as `X_Value,Current A,Current B,VoltageA`. Rows after that
//! are comma (or tab) separated numbers; `X_Value` is the timestamp in seconds.
//! A directory is read as the concatenation of its `.txt`/`.csv` files in
//! name order.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{LoadReport, SampleStream};
use crate::error::{Error, Result};

pub const BLUED_SAMPLE_RATE_HZ: f64 = 12_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    A,
    B,
}

impl Phase {
    fn column(self) -> &'static str {
        match self {
            Phase::A => "current a",
            Phase::B => "current b",
        }
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Ok(Phase::A),
            "B" => Ok(Phase::B),
            other => Err(Error::InvalidArgument(format!("unknown phase {other:?}"))),
        }
    }
}

/// Loads one phase's current at the native 12 kHz rate. The stream origin is
/// the first row's `X_Value` when that column exists.
pub fn read_blued_phase(path: &Path, phase: Phase) -> Result<(SampleStream, LoadReport)> {
    let files = if path.is_dir() {
        list_data_files(path)?
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        return Err(Error::NoSamples {
            path: path.to_path_buf(),
        });
    }

    let mut samples = Vec::new();
    let mut report = LoadReport::default();
    let mut origin = None;
    for file in &files {
        let text = fs::read_to_string(file).map_err(|source| Error::Io {
            path: file.clone(),
            source,
        })?;
        let first_time = parse_phase(&text, phase, &mut samples, &mut report).map_err(|detail| {
            Error::MalformedHeader {
                path: file.clone(),
                detail,
            }
        })?;
        if origin.is_none() {
            origin = first_time;
        }
    }
    if samples.is_empty() {
        return Err(Error::NoSamples {
            path: path.to_path_buf(),
        });
    }
    let stream = SampleStream::with_origin(samples, BLUED_SAMPLE_RATE_HZ, origin.unwrap_or(0.0))?;
    Ok((stream, report))
}

fn list_data_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|source| Error::Io {
                path: dir.to_path_buf(),
                source,
            })?
            .path();
        let is_data = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("txt") || e.eq_ignore_ascii_case("csv"));
        if path.is_file() && is_data {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn split_row(line: &str) -> impl Iterator<Item = &str> {
    line.split([',', '\t']).map(str::trim)
}

/// Appends one phase's samples from `text`; returns the first timestamp seen.
fn parse_phase(
    text: &str,
    phase: Phase,
    samples: &mut Vec<f64>,
    report: &mut LoadReport,
) -> Result<Option<f64>, String> {
    let mut lines = text.lines();
    let (current_col, time_col) = loop {
        let Some(line) = lines.next() else {
            return Err(format!("no column header with {:?}", phase.column()));
        };
        let names: Vec<String> = split_row(line).map(|c| c.to_ascii_lowercase()).collect();
        if let Some(c) = names.iter().position(|n| n == phase.column()) {
            break (c, names.iter().position(|n| n == "x_value"));
        }
    };

    let mut first_time = None;
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        report.entries += 1;
        let cells: Vec<&str> = split_row(line).collect();
        if first_time.is_none() {
            first_time = time_col
                .and_then(|c| cells.get(c))
                .and_then(|c| c.parse::<f64>().ok())
                .filter(|t| t.is_finite());
        }
        match cells.get(current_col).map(|c| c.parse::<f64>()) {
            Some(Ok(v)) if v.is_finite() => samples.push(v),
            _ => report.dropped += 1,
        }
    }
    Ok(first_time)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "LabVIEW Measurement\nWriter_Version\t0.92\n***End_of_Header***\n\
X_Value,Current A,Current B,VoltageA,Comment\n\
12.5,0.1,-0.1,120\n\
12.5000833,0.2,,121\n\
12.5001667,0.3,-0.3,122\n";

    #[test]
    fn picks_phase_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("location_001_ivdata_1.txt");
        fs::write(&path, SAMPLE).unwrap();

        let (a, report) = read_blued_phase(&path, Phase::A).unwrap();
        assert_eq!(a.samples(), &[0.1, 0.2, 0.3]);
        assert_eq!(a.sample_rate_hz(), BLUED_SAMPLE_RATE_HZ);
        assert_eq!(a.origin_offset_s(), 12.5);
        assert_eq!(report.dropped, 0);

        let (b, report) = read_blued_phase(&path, Phase::B).unwrap();
        assert_eq!(b.samples(), &[-0.1, -0.3]);
        assert_eq!(report.dropped, 1);
    }

    #[test]
    fn directory_is_concatenated_in_name_order() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("b.txt"), "X_Value,Current A\n2,3\n").unwrap();
        fs::write(dir.path().join("a.txt"), "X_Value,Current A\n1,1\n1.1,2\n").unwrap();
        fs::write(dir.path().join("notes.md"), "ignored").unwrap();
        let (s, _) = read_blued_phase(dir.path(), Phase::A).unwrap();
        assert_eq!(s.samples(), &[1.0, 2.0, 3.0]);
        assert_eq!(s.origin_offset_s(), 1.0);
    }

    #[test]
    fn missing_column_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.txt");
        fs::write(&path, "X_Value,VoltageA\n1,2\n").unwrap();
        assert!(matches!(
            read_blued_phase(&path, Phase::A),
            Err(Error::MalformedHeader { .. })
        ));
    }

    #[test]
    fn phase_parsing() {
        assert_eq!("a".parse::<Phase>().unwrap(), Phase::A);
        assert_eq!("B".parse::<Phase>().unwrap(), Phase::B);
        assert!("C".parse::<Phase>().is_err());
    }
}
