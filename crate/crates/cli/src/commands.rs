use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use tfed::detector::{detect as run_detector, DetectionOutput};
use tfed::eval::{count_tn, match_times, WindowSpan};
use tfed::signal_io::{
    decimate, generate_synthetic, read_blued_phase, read_ground_truth, read_waveform, write_ground_truth,
    write_waveform, Harmonic, SyntheticEvent, SyntheticSpec,
};
use tfed::{compute_metrics, DetectorConfig, GroundTruthEvent, Metrics, SampleStream, WaveFormat};

use crate::config::{write_provenance, Resolved};

/// One line of the events file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub sample_index: usize,
    pub time_s: f64,
    pub window_start: usize,
}

/// One line of the verdicts file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub window_start: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub is_event: bool,
    pub first_outlier_block: Option<usize>,
    pub selected_bin: usize,
    pub delta_p: f64,
    pub q1: f64,
    pub q3: f64,
    pub lo: f64,
    pub hi: f64,
}

fn require<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    value.as_deref().ok_or_else(|| anyhow!("missing --{flag}"))
}

/// Sink for a command's main output: a file when `--out` is set, else stdout.
fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

fn load_stream(cfg: &Resolved) -> Result<SampleStream> {
    let input = require(&cfg.raw.input, "input")?;
    let (raw, report) = match cfg.blued {
        Some(phase) => read_blued_phase(input, phase),
        None => read_waveform(input, cfg.format, cfg.rate),
    }
    .with_context(|| format!("loading {}", input.display()))?;
    eprintln!("{}: {report}", input.display());
    let raw = if cfg.blued.is_some() && cfg.raw.rate.is_some() {
        let origin = raw.origin_offset_s();
        SampleStream::with_origin(raw.into_samples(), cfg.rate, origin)?
    } else {
        raw
    };
    Ok(decimate(&raw, cfg.decimate)?)
}

fn spans(out: &DetectionOutput, det: &DetectorConfig, rate: f64) -> Vec<WindowSpan> {
    out.verdicts
        .iter()
        .map(|v| WindowSpan::from_verdict(v, det.windowing.window_len, rate))
        .collect()
}

pub fn detect(cfg: &Resolved) -> Result<()> {
    let stream = load_stream(cfg)?;
    let out = run_detector(&stream, &cfg.detector)?;
    let rate = stream.sample_rate_hz();

    let mut sink = open_output(cfg.raw.out.as_deref())?;
    for ev in &out.events {
        let rec = EventRecord {
            sample_index: ev.sample_index,
            time_s: ev.time_s,
            window_start: ev.window_start(),
        };
        serde_json::to_writer(&mut sink, &rec)?;
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    if let Some(path) = &cfg.raw.out {
        write_provenance(path, cfg)?;
    }

    if let Some(path) = &cfg.raw.verdicts {
        let mut sink = open_output(Some(path))?;
        for (v, span) in out.verdicts.iter().zip(spans(&out, &cfg.detector, rate)) {
            let rec = VerdictRecord {
                window_start: v.window_start,
                start_s: span.start_s,
                end_s: span.end_s,
                is_event: v.is_event(),
                first_outlier_block: v.first_outlier_block,
                selected_bin: v.selection.selected_bin,
                delta_p: v.selection.delta_p,
                q1: v.fences.q1,
                q3: v.fences.q3,
                lo: v.fences.lo,
                hi: v.fences.hi,
            };
            serde_json::to_writer(&mut sink, &rec)?;
            sink.write_all(b"\n")?;
        }
        sink.flush()?;
        write_provenance(path, cfg)?;
    }
    eprintln!(
        "{} windows, {} flagged, {} events",
        out.verdicts.len(),
        out.verdicts.iter().filter(|v| v.is_event()).count(),
        out.events.len()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Length of the recording in seconds.
    #[arg(long)]
    duration: f64,
    /// Mains frequency in Hz.
    #[arg(long, default_value_t = 60.0)]
    mains: f64,
    /// Peak amplitude of the base load in amperes.
    #[arg(long, default_value_t = 1.0)]
    base: f64,
    /// Gaussian noise standard deviation in amperes.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// TIME:DELTA or TIME:DELTA:ORDER:AMPLITUDE; repeatable.
    #[arg(long = "event", value_name = "SPEC")]
    events: Vec<String>,
    /// Generate this many alternating on/off steps instead of --event.
    #[arg(long)]
    random_events: Option<usize>,
    #[arg(long, default_value_t = 0.3)]
    min_delta: f64,
    #[arg(long, default_value_t = 1.0)]
    max_delta: f64,
}

fn parse_event(spec: &str) -> Result<SyntheticEvent> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| -> Result<f64> { s.trim().parse().map_err(|_| anyhow!("bad number {s:?} in event {spec:?}")) };
    match parts.as_slice() {
        [t, d] => Ok(SyntheticEvent::step(num(t)?, num(d)?)),
        [t, d, order, amp] => Ok(SyntheticEvent {
            time_s: num(t)?,
            amplitude_delta_a: num(d)?,
            harmonic: Some(Harmonic {
                order: order.trim().parse().map_err(|_| anyhow!("bad harmonic order in {spec:?}"))?,
                amplitude_a: num(amp)?,
            }),
        }),
        _ => bail!("event must be TIME:DELTA or TIME:DELTA:ORDER:AMPLITUDE, got {spec:?}"),
    }
}

pub fn synth(cfg: &Resolved, args: &SynthArgs) -> Result<()> {
    let out = require(&cfg.raw.out, "out")?;
    let mut spec = SyntheticSpec {
        duration_s: args.duration,
        sample_rate_hz: cfg.rate,
        mains_hz: args.mains,
        base_amplitude_a: args.base,
        noise_std_a: args.noise,
        events: args.events.iter().map(|e| parse_event(e)).collect::<Result<_>>()?,
        seed: cfg.seed,
    };
    if let Some(n) = args.random_events {
        if !spec.events.is_empty() {
            bail!("--random-events and --event are mutually exclusive");
        }
        spec = spec.with_on_off_schedule(n, args.min_delta, args.max_delta)?;
    }
    let (stream, truth) = generate_synthetic(&spec)?;
    let format = match &cfg.raw.format {
        Some(_) => cfg.format,
        None => WaveFormat::RawF64Le,
    };
    write_waveform(out, stream.samples(), format)?;
    let truth_path = match &cfg.raw.truth {
        Some(p) => p.clone(),
        None => {
            let mut name = out.as_os_str().to_owned();
            name.push(".truth.csv");
            PathBuf::from(name)
        }
    };
    write_ground_truth(&truth_path, &truth)?;
    write_provenance(out, cfg)?;
    eprintln!(
        "wrote {} samples to {} and {} events to {}",
        stream.len(),
        out.display(),
        truth.len(),
        truth_path.display()
    );
    Ok(())
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    Ok(out)
}

fn score(detected: &[f64], truth: &[GroundTruthEvent], spans: &[WindowSpan], tolerance_s: f64) -> Result<Metrics> {
    let times: Vec<f64> = truth.iter().map(|e| e.time_s).collect();
    let m = match_times(detected, &times, tolerance_s)?;
    Ok(compute_metrics(&m, count_tn(spans, truth, tolerance_s)?))
}

pub fn eval(cfg: &Resolved) -> Result<()> {
    let events: Vec<EventRecord> = read_jsonl(require(&cfg.raw.events, "events")?)?;
    let truth_path = require(&cfg.raw.truth, "truth")?;
    let truth = read_ground_truth(truth_path).with_context(|| format!("loading {}", truth_path.display()))?;
    let spans: Vec<WindowSpan> = match &cfg.raw.verdicts {
        Some(path) => read_jsonl::<VerdictRecord>(path)?
            .into_iter()
            .map(|v| WindowSpan {
                start_s: v.start_s,
                end_s: v.end_s,
                is_event: v.is_event,
            })
            .collect(),
        None => Vec::new(),
    };
    let detected: Vec<f64> = events.iter().map(|e| e.time_s).collect();
    let metrics = score(&detected, &truth, &spans, cfg.tolerance_s)?;

    let mut json = serde_json::to_string(&metrics)?;
    json.push('\n');
    print!("{json}");
    io::stdout().flush()?;
    if let Some(path) = &cfg.raw.out {
        fs::write(path, &json).with_context(|| format!("writing {}", path.display()))?;
        write_provenance(path, cfg)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SweepParam {
    Step,
    K,
    StdWindow,
}

impl SweepParam {
    fn parse(name: &str) -> Result<Self> {
        match name.replace('-', "_").as_str() {
            "step" => Ok(Self::Step),
            "k" => Ok(Self::K),
            "std_window" => Ok(Self::StdWindow),
            _ => bail!("unknown sweep parameter {name:?} (expected step, k or std-window)"),
        }
    }

    fn apply(self, base: &DetectorConfig, value: &str) -> Result<DetectorConfig> {
        let mut cfg = *base;
        let bad = || anyhow!("bad value {value:?} for {self:?}");
        match self {
            Self::Step => cfg.windowing.step = value.trim().parse().map_err(|_| bad())?,
            Self::K => cfg.k = value.trim().parse().map_err(|_| bad())?,
            Self::StdWindow => cfg.std_window = value.trim().parse().map_err(|_| bad())?,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn sweep(cfg: &Resolved, param: &str, values: &[String]) -> Result<()> {
    let param = SweepParam::parse(param)?;
    if values.is_empty() {
        bail!("--values needs at least one value");
    }
    let configs: Vec<DetectorConfig> = values
        .iter()
        .map(|v| param.apply(&cfg.detector, v))
        .collect::<Result<_>>()?;
    let truth_path = require(&cfg.raw.truth, "truth")?;
    let truth = read_ground_truth(truth_path).with_context(|| format!("loading {}", truth_path.display()))?;
    let stream = load_stream(cfg)?;
    let rate = stream.sample_rate_hz();

    let mut sink = open_output(cfg.raw.out.as_deref())?;
    writeln!(sink, "value,tp,fp,fn,precision,recall,f_measure,wall_time_ms")?;
    for (value, det) in values.iter().zip(&configs) {
        let start = Instant::now();
        let out = run_detector(&stream, det)?;
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        let detected: Vec<f64> = out.events.iter().map(|e| e.time_s).collect();
        let m = score(&detected, &truth, &spans(&out, det, rate), cfg.tolerance_s)?;
        writeln!(
            sink,
            "{},{},{},{},{},{},{},{:.3}",
            value.trim(),
            m.tp,
            m.fp,
            m.fn_count,
            m.precision,
            m.recall,
            m.f_measure,
            wall_ms
        )?;
    }
    sink.flush()?;
    if let Some(path) = &cfg.raw.out {
        write_provenance(path, cfg)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn event_specs() {
        let e = parse_event("3.0:0.5").unwrap();
        assert_eq!((e.time_s, e.amplitude_delta_a, e.harmonic), (3.0, 0.5, None));
        let e = parse_event("1:-0.2:3:0.1").unwrap();
        assert_eq!(e.harmonic, Some(Harmonic { order: 3, amplitude_a: 0.1 }));
        assert!(parse_event("1").is_err());
        assert!(parse_event("a:b").is_err());
    }

    #[test]
    fn sweep_params() {
        assert_eq!(SweepParam::parse("std-window").unwrap(), SweepParam::StdWindow);
        assert!(SweepParam::parse("window").is_err());
        let base = DetectorConfig::default();
        assert_eq!(SweepParam::Step.apply(&base, "3008").unwrap().windowing.step, 3008);
        assert_eq!(SweepParam::K.apply(&base, "1.5").unwrap().k, 1.5);
        assert!(SweepParam::StdWindow.apply(&base, "1").is_err());
        assert!(SweepParam::K.apply(&base, "x").is_err());
    }
}
