//! Seeded synthetic current waveforms with known event times.
//!
//! Noise comes from a ChaCha20 stream (`rand_chacha`) seeded from the 64-bit
//! seed and shaped by the ziggurat standard-normal sampler in `rand_distr`.
//! Both are pure-software and platform independent, so a given spec yields the
//! same samples on every machine.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use super::{GroundTruthEvent, SampleStream};
use crate::error::{Error, Result};

const NOISE_STREAM: u64 = 0;
const SCHEDULE_STREAM: u64 = 1;

/// Extra harmonic current switched on with an event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Harmonic {
    /// Multiple of the mains frequency.
    pub order: u32,
    pub amplitude_a: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticEvent {
    pub time_s: f64,
    /// Change of the fundamental's peak amplitude from `time_s` onward.
    pub amplitude_delta_a: f64,
    pub harmonic: Option<Harmonic>,
}

impl SyntheticEvent {
    pub fn step(time_s: f64, amplitude_delta_a: f64) -> Self {
        Self {
            time_s,
            amplitude_delta_a,
            harmonic: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub mains_hz: f64,
    pub base_amplitude_a: f64,
    pub noise_std_a: f64,
    pub events: Vec<SyntheticEvent>,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            duration_s: 60.0,
            sample_rate_hz: 6000.0,
            mains_hz: 60.0,
            base_amplitude_a: 1.0,
            noise_std_a: 0.0,
            events: Vec::new(),
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    /// Replaces `events` with `count` alternating on/off steps.
    ///
    /// Events sit near the centres of `count` equal slots across the duration,
    /// jittered by up to a fifth of a slot. Each "on" step draws a magnitude
    /// uniformly from `[min_delta_a, max_delta_a]` and the following "off"
    /// step removes it again, so the load returns to base after every pair.
    pub fn with_on_off_schedule(mut self, count: usize, min_delta_a: f64, max_delta_a: f64) -> Result<Self> {
        if !(min_delta_a.is_finite() && max_delta_a.is_finite() && 0.0 <= min_delta_a && min_delta_a <= max_delta_a) {
            return Err(Error::InvalidArgument(format!(
                "bad step range [{min_delta_a}, {max_delta_a}]"
            )));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::InvalidArgument("duration must be positive".into()));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(SCHEDULE_STREAM);
        let slot = self.duration_s / count.max(1) as f64;
        let mut on_delta = 0.0;
        self.events = (0..count)
            .map(|i| {
                let jitter: f64 = rng.random_range(-0.2..=0.2);
                let time_s = (i as f64 + 0.5 + jitter) * slot;
                let delta = if i % 2 == 0 {
                    on_delta = rng.random_range(min_delta_a..=max_delta_a);
                    on_delta
                } else {
                    -on_delta
                };
                SyntheticEvent::step(time_s, delta)
            })
            .collect();
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return bad(format!("duration must be positive, got {}", self.duration_s));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return bad(format!("sample rate must be positive, got {}", self.sample_rate_hz));
        }
        if !(self.mains_hz.is_finite() && self.mains_hz >= 0.0) {
            return bad(format!("mains frequency must be >= 0, got {}", self.mains_hz));
        }
        if !self.base_amplitude_a.is_finite() {
            return bad("base amplitude must be finite".into());
        }
        if !(self.noise_std_a.is_finite() && self.noise_std_a >= 0.0) {
            return bad(format!("noise std must be >= 0, got {}", self.noise_std_a));
        }
        for ev in &self.events {
            if !(ev.time_s >= 0.0 && ev.time_s < self.duration_s) {
                return bad(format!(
                    "event time {} outside [0, {})",
                    ev.time_s, self.duration_s
                ));
            }
            if !ev.amplitude_delta_a.is_finite() {
                return bad("event amplitude must be finite".into());
            }
            if let Some(h) = ev.harmonic {
                if h.order == 0 || !h.amplitude_a.is_finite() {
                    return bad("harmonic order must be >= 1 with finite amplitude".into());
                }
            }
        }
        Ok(())
    }
}

/// Renders the waveform described by `spec` and its sorted event times.
///
/// Sample `n` (at `t = n / rate`) is `A(t)·sin(2π·mains·t)` plus any active
/// harmonics plus Gaussian noise, where `A(t)` is the base amplitude plus the
/// deltas of every event at or before `t`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(SampleStream, Vec<GroundTruthEvent>)> {
    spec.validate()?;
    let rate = spec.sample_rate_hz;
    let n_samples = (spec.duration_s * rate).round() as usize;

    let mut events = spec.events.clone();
    events.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
    let onsets: Vec<usize> = events
        .iter()
        .map(|ev| ((ev.time_s * rate).ceil() as usize).min(n_samples))
        .collect();

    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    rng.set_stream(NOISE_STREAM);

    let mut samples = Vec::with_capacity(n_samples);
    let mut amplitude = spec.base_amplitude_a;
    let mut harmonics: Vec<Harmonic> = Vec::new();
    let mut next = 0;
    for n in 0..n_samples {
        while next < events.len() && onsets[next] <= n {
            amplitude += events[next].amplitude_delta_a;
            harmonics.extend(events[next].harmonic);
            next += 1;
        }
        let phase = TAU * spec.mains_hz * (n as f64 / rate);
        let mut v = amplitude * phase.sin();
        for h in &harmonics {
            v += h.amplitude_a * (h.order as f64 * phase).sin();
        }
        if spec.noise_std_a > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            v += spec.noise_std_a * z;
        }
        samples.push(v);
    }

    let truth = events
        .iter()
        .map(|ev| {
            let label = if ev.amplitude_delta_a >= 0.0 { "on" } else { "off" };
            GroundTruthEvent::labelled(ev.time_s, label)
        })
        .collect();
    Ok((SampleStream::new(samples, rate)?, truth))
}
