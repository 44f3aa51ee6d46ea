//! Waveform and ground-truth ingest, decimation and synthetic test signals.

mod blued;
mod synth;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use blued::{read_blued_phase, Phase, BLUED_SAMPLE_RATE_HZ};
pub use synth::{generate_synthetic, Harmonic, SyntheticEvent, SyntheticSpec};

/// A finite run of current samples (amperes) at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream {
    samples: Vec<f64>,
    sample_rate_hz: f64,
    origin_offset_s: f64,
}

impl SampleStream {
    /// Builds a stream, rejecting a non-positive rate and non-finite samples.
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        Self::with_origin(samples, sample_rate_hz, 0.0)
    }

    pub fn with_origin(samples: Vec<f64>, sample_rate_hz: f64, origin_offset_s: f64) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if !origin_offset_s.is_finite() {
            return Err(Error::InvalidArgument("origin offset must be finite".into()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            origin_offset_s,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    /// Timestamp of sample 0, in seconds.
    pub fn origin_offset_s(&self) -> f64 {
        self.origin_offset_s
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// On-disk sample encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WaveFormat {
    /// One decimal sample per line, optional single header line.
    Csv,
    /// Little-endian IEEE-754 single precision, no header.
    RawF32Le,
    /// Little-endian IEEE-754 double precision, no header.
    RawF64Le,
}

impl WaveFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            WaveFormat::Csv => "csv",
            WaveFormat::RawF32Le => "raw-f32le",
            WaveFormat::RawF64Le => "raw-f64le",
        }
    }
}

impl FromStr for WaveFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(WaveFormat::Csv),
            "raw-f32le" => Ok(WaveFormat::RawF32Le),
            "raw-f64le" => Ok(WaveFormat::RawF64Le),
            other => Err(Error::InvalidArgument(format!("unknown format {other:?}"))),
        }
    }
}

impl std::fmt::Display for WaveFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What happened while loading a waveform.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    /// Entries seen in the body, valid or not.
    pub entries: usize,
    /// Entries dropped as missing, unparseable or non-finite.
    pub dropped: usize,
}

impl std::fmt::Display for LoadReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} loaded, {} dropped", self.entries - self.dropped, self.dropped)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Loads a single-channel waveform. Missing, unparseable and non-finite
/// entries are dropped and counted in the returned report.
pub fn read_waveform(
    path: &Path,
    format: WaveFormat,
    sample_rate_hz: f64,
) -> Result<(SampleStream, LoadReport)> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let (samples, report) = match format {
        WaveFormat::Csv => {
            let text = String::from_utf8(bytes).map_err(|e| Error::MalformedHeader {
                path: path.to_path_buf(),
                detail: format!("not UTF-8 text: {e}"),
            })?;
            parse_csv_samples(&text).map_err(|detail| Error::MalformedHeader {
                path: path.to_path_buf(),
                detail,
            })?
        }
        WaveFormat::RawF32Le => decode_raw::<4>(path, &bytes, |b| f32::from_le_bytes(b) as f64)?,
        WaveFormat::RawF64Le => decode_raw::<8>(path, &bytes, f64::from_le_bytes)?,
    };
    if samples.is_empty() {
        return Err(Error::NoSamples {
            path: path.to_path_buf(),
        });
    }
    Ok((SampleStream::new(samples, sample_rate_hz)?, report))
}

fn parse_csv_samples(text: &str) -> Result<(Vec<f64>, LoadReport), String> {
    let mut lines = text.lines().peekable();
    // Optional single header: the first line, if it is not a number.
    if let Some(first) = lines.peek() {
        let first = first.trim();
        if !first.is_empty() && first.parse::<f64>().is_err() {
            if first.contains([',', ';', '\t']) {
                return Err(format!("expected a single column, header is {first:?}"));
            }
            lines.next();
            if let Some(second) = lines.peek() {
                let second = second.trim();
                if !second.is_empty()
                    && second.parse::<f64>().is_err()
                    && !is_missing_marker(second)
                {
                    return Err(format!("more than one header line (second is {second:?})"));
                }
            }
        }
    }

    let mut report = LoadReport::default();
    let mut samples = Vec::new();
    for line in lines {
        report.entries += 1;
        match line.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => samples.push(v),
            _ => report.dropped += 1,
        }
    }
    // A trailing blank line is the file terminator, not a missing entry.
    if text.ends_with("\n\n") || text.ends_with("\r\n\r\n") {
        report.entries -= 1;
        report.dropped -= 1;
    }
    Ok((samples, report))
}

fn is_missing_marker(s: &str) -> bool {
    matches!(
        s.to_ascii_lowercase().as_str(),
        "nan" | "na" | "n/a" | "null" | "inf" | "-inf" | "+inf"
    )
}

fn decode_raw<const W: usize>(
    path: &Path,
    bytes: &[u8],
    decode: impl Fn([u8; W]) -> f64,
) -> Result<(Vec<f64>, LoadReport)> {
    if bytes.len() % W != 0 {
        return Err(Error::TruncatedRaw {
            path: path.to_path_buf(),
            len: bytes.len() as u64,
            width: W,
        });
    }
    let mut report = LoadReport::default();
    let mut samples = Vec::with_capacity(bytes.len() / W);
    for chunk in bytes.chunks_exact(W) {
        report.entries += 1;
        let v = decode(chunk.try_into().expect("chunk width"));
        if v.is_finite() {
            samples.push(v);
        } else {
            report.dropped += 1;
        }
    }
    Ok((samples, report))
}

/// Writes samples in the given format. CSV output has no header.
pub fn write_waveform(path: &Path, samples: &[f64], format: WaveFormat) -> Result<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    let res = (|| -> std::io::Result<()> {
        match format {
            WaveFormat::Csv => {
                for v in samples {
                    writeln!(out, "{v}")?;
                }
            }
            WaveFormat::RawF32Le => {
                for v in samples {
                    out.write_all(&(*v as f32).to_le_bytes())?;
                }
            }
            WaveFormat::RawF64Le => {
                for v in samples {
                    out.write_all(&v.to_le_bytes())?;
                }
            }
        }
        out.flush()
    })();
    res.map_err(io_err(path))
}

/// Keeps every `factor`-th sample starting at index 0. No anti-alias filter
/// is applied.
pub fn decimate(stream: &SampleStream, factor: usize) -> Result<SampleStream> {
    if factor == 0 {
        return Err(Error::InvalidArgument("decimation factor must be >= 1".into()));
    }
    let samples = stream.samples.iter().copied().step_by(factor).collect();
    Ok(SampleStream {
        samples,
        sample_rate_hz: stream.sample_rate_hz / factor as f64,
        origin_offset_s: stream.origin_offset_s,
    })
}

/// A labelled event timestamp, in seconds from the stream origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthEvent {
    pub time_s: f64,
    pub label: Option<String>,
}

impl GroundTruthEvent {
    pub fn new(time_s: f64) -> Self {
        Self { time_s, label: None }
    }

    pub fn labelled(time_s: f64, label: impl Into<String>) -> Self {
        Self {
            time_s,
            label: Some(label.into()),
        }
    }
}

/// Reads `time_s[,label]` rows and returns them sorted by time. A leading
/// `time_s` header row and blank lines are skipped; duplicates are kept.
pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruthEvent>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_ground_truth(&text)
}

pub fn parse_ground_truth(text: &str) -> Result<Vec<GroundTruthEvent>> {
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (time, label) = match line.split_once(',') {
            Some((t, l)) => (t.trim(), Some(l.trim())),
            None => (line, None),
        };
        if i == 0 && time.eq_ignore_ascii_case("time_s") {
            continue;
        }
        let time_s: f64 = time.parse().map_err(|_| Error::Parse {
            line: i + 1,
            detail: format!("bad time {time:?}"),
        })?;
        if !time_s.is_finite() {
            return Err(Error::Parse {
                line: i + 1,
                detail: format!("non-finite time {time:?}"),
            });
        }
        if time_s < 0.0 {
            return Err(Error::Parse {
                line: i + 1,
                detail: format!("negative time {time_s}"),
            });
        }
        let label = label.filter(|l| !l.is_empty()).map(str::to_owned);
        events.push(GroundTruthEvent { time_s, label });
    }
    events.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
    Ok(events)
}

/// Writes `time_s[,label]` rows with no header.
pub fn write_ground_truth(path: &Path, events: &[GroundTruthEvent]) -> Result<()> {
    let mut text = String::new();
    for ev in events {
        match &ev.label {
            Some(label) => text.push_str(&format!("{},{}\n", ev.time_s, label)),
            None => text.push_str(&format!("{}\n", ev.time_s)),
        }
    }
    fs::write(path, text).map_err(io_err(path))
}
