//! `key = value` run configuration shared by every subcommand.
//!
//! Values come from an optional config file and are overridden by flags. The
//! resolved configuration is written back out in the same format next to
//! every output file, so a run can be repeated with `--config`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use tfed::signal_io::Phase;
use tfed::windowing::WindowingConfig;
use tfed::{DetectorConfig, WaveFormat};

/// Every setting a run can take; `None` means "not given here".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub format: Option<String>,
    pub rate: Option<f64>,
    pub decimate: Option<usize>,
    pub window: Option<usize>,
    pub step: Option<usize>,
    pub block: Option<usize>,
    pub k: Option<f64>,
    pub std_window: Option<usize>,
    pub truth: Option<PathBuf>,
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub events: Option<PathBuf>,
    pub verdicts: Option<PathBuf>,
    pub blued_layout: Option<String>,
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("bad value {value:?} for {key}: {e}"))
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", i + 1))?;
            cfg.set(key.trim(), value.trim())
                .with_context(|| format!("line {}", i + 1))?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('-', "_");
        match key.as_str() {
            "input" => self.input = Some(value.into()),
            "format" => self.format = Some(value.to_owned()),
            "rate" => self.rate = Some(parse_value(&key, value)?),
            "decimate" => self.decimate = Some(parse_value(&key, value)?),
            "window" => self.window = Some(parse_value(&key, value)?),
            "step" => self.step = Some(parse_value(&key, value)?),
            "block" => self.block = Some(parse_value(&key, value)?),
            "k" => self.k = Some(parse_value(&key, value)?),
            "std_window" => self.std_window = Some(parse_value(&key, value)?),
            "truth" => self.truth = Some(value.into()),
            "tolerance" => self.tolerance = Some(parse_value(&key, value)?),
            "seed" => self.seed = Some(parse_value(&key, value)?),
            "out" => self.out = Some(value.into()),
            "events" => self.events = Some(value.into()),
            "verdicts" => self.verdicts = Some(value.into()),
            "blued_layout" => self.blued_layout = Some(value.to_owned()),
            _ => bail!("unknown config key {key:?}"),
        }
        Ok(())
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(self, over: RunConfig) -> Self {
        Self {
            input: over.input.or(self.input),
            format: over.format.or(self.format),
            rate: over.rate.or(self.rate),
            decimate: over.decimate.or(self.decimate),
            window: over.window.or(self.window),
            step: over.step.or(self.step),
            block: over.block.or(self.block),
            k: over.k.or(self.k),
            std_window: over.std_window.or(self.std_window),
            truth: over.truth.or(self.truth),
            tolerance: over.tolerance.or(self.tolerance),
            seed: over.seed.or(self.seed),
            out: over.out.or(self.out),
            events: over.events.or(self.events),
            verdicts: over.verdicts.or(self.verdicts),
            blued_layout: over.blued_layout.or(self.blued_layout),
        }
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let blued = self
            .blued_layout
            .as_deref()
            .map(|p| p.parse::<Phase>())
            .transpose()?;
        let format: WaveFormat = self.format.as_deref().unwrap_or("csv").parse()?;
        let defaults = DetectorConfig::default();
        let detector = DetectorConfig {
            k: self.k.unwrap_or(defaults.k),
            std_window: self.std_window.unwrap_or(defaults.std_window),
            windowing: WindowingConfig {
                window_len: self.window.unwrap_or(defaults.windowing.window_len),
                step: self.step.unwrap_or(defaults.windowing.step),
                block_len: self.block.unwrap_or(defaults.windowing.block_len),
            },
        };
        detector.validate()?;
        let rate = match (self.rate, blued) {
            (Some(r), _) => r,
            (None, Some(_)) => tfed::signal_io::BLUED_SAMPLE_RATE_HZ,
            (None, None) => 6000.0,
        };
        if !(rate.is_finite() && rate > 0.0) {
            bail!("rate must be positive, got {rate}");
        }
        let decimate = self.decimate.unwrap_or(if blued.is_some() { 2 } else { 1 });
        if decimate == 0 {
            bail!("decimate must be >= 1");
        }
        let mut resolved = Resolved {
            raw: self.clone(),
            format,
            rate,
            decimate,
            detector,
            tolerance_s: 0.0,
            seed: self.seed.unwrap_or(0),
            blued,
        };
        let tolerance_s = self
            .tolerance
            .unwrap_or(detector.windowing.window_len as f64 / resolved.effective_rate());
        if !(tolerance_s.is_finite() && tolerance_s >= 0.0) {
            bail!("tolerance must be >= 0, got {tolerance_s}");
        }
        resolved.tolerance_s = tolerance_s;
        Ok(resolved)
    }
}

/// A fully concrete configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub raw: RunConfig,
    pub format: WaveFormat,
    /// Input sample rate, before decimation.
    pub rate: f64,
    pub decimate: usize,
    pub detector: DetectorConfig,
    pub tolerance_s: f64,
    pub seed: u64,
    pub blued: Option<Phase>,
}

impl Resolved {
    pub fn effective_rate(&self) -> f64 {
        self.rate / self.decimate as f64
    }

    /// The effective configuration as `key = value` lines.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        if let Some(p) = path(&self.raw.input) {
            line("input", &p);
        }
        line("format", &self.format);
        line("rate", &self.rate);
        line("decimate", &self.decimate);
        line("window", &self.detector.windowing.window_len);
        line("step", &self.detector.windowing.step);
        line("block", &self.detector.windowing.block_len);
        line("k", &self.detector.k);
        line("std_window", &self.detector.std_window);
        line("tolerance", &self.tolerance_s);
        line("seed", &self.seed);
        if let Some(phase) = &self.raw.blued_layout {
            line("blued_layout", phase);
        }
        for (key, value) in [
            ("truth", &self.raw.truth),
            ("events", &self.raw.events),
            ("verdicts", &self.raw.verdicts),
            ("out", &self.raw.out),
        ] {
            if let Some(p) = path(value) {
                line(key, &p);
            }
        }
        s
    }
}

/// Writes the effective configuration beside `out` as `<out>.config`.
pub fn write_provenance(out: &Path, resolved: &Resolved) -> Result<()> {
    let mut name = out.as_os_str().to_owned();
    name.push(".config");
    let path = PathBuf::from(name);
    fs::write(&path, resolved.render()).with_context(|| format!("writing {}", path.display()))
}
