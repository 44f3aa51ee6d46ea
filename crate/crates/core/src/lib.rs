//! Event detection for non-intrusive load monitoring.
//!
//! An aggregate current waveform is cut into fixed-length windows, each window
//! is reshaped into blocks and turned into a magnitude spectrogram, the most
//! discriminative frequency bin is tracked with a forward standard deviation,
//! and Tukey's fences on that series decide whether the window holds an
//! appliance switching event.
//!
//! The crate also carries the supporting pieces needed to run and score the
//! detector: waveform and ground-truth loaders, a seeded synthetic waveform
//! generator, and an event matcher with precision/recall metrics.

pub mod detector;
mod error;
pub mod eval;
pub mod signal_io;
pub mod spectral;
pub mod windowing;

pub use detector::{detect, DetectedEvent, DetectionOutput, DetectorConfig, WindowVerdict};
pub use error::{Error, Result};
pub use eval::{compute_metrics, count_tn, match_events, MatchResult, Metrics};
pub use signal_io::{GroundTruthEvent, SampleStream, SyntheticSpec, WaveFormat};
pub use windowing::WindowingConfig;
