//! Scoring detections against ground truth.

use serde::{Deserialize, Serialize};

use crate::detector::{DetectedEvent, WindowVerdict};
use crate::error::{Error, Result};
use crate::signal_io::GroundTruthEvent;

/// One-to-one pairing of detections with truths.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// `(detection index, truth index)` pairs, in truth order.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_detections: Vec<usize>,
    pub unmatched_truths: Vec<usize>,
    pub tolerance_s: f64,
}

impl MatchResult {
    pub fn tp(&self) -> usize {
        self.pairs.len()
    }

    pub fn fp(&self) -> usize {
        self.unmatched_detections.len()
    }

    pub fn fn_count(&self) -> usize {
        self.unmatched_truths.len()
    }
}

fn check_sorted(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Unsorted);
    }
    Ok(())
}

pub fn match_events(
    detected: &[DetectedEvent],
    truth: &[GroundTruthEvent],
    tolerance_s: f64,
) -> Result<MatchResult> {
    let det: Vec<f64> = detected.iter().map(|e| e.time_s).collect();
    let tru: Vec<f64> = truth.iter().map(|e| e.time_s).collect();
    match_times(&det, &tru, tolerance_s)
}

/// Greedy chronological matching: each truth, in order, takes the earliest
/// unmatched detection within `±tolerance_s`.
pub fn match_times(detected: &[f64], truth: &[f64], tolerance_s: f64) -> Result<MatchResult> {
    if !(tolerance_s.is_finite() && tolerance_s >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be >= 0, got {tolerance_s}"
        )));
    }
    check_sorted(detected)?;
    check_sorted(truth)?;

    let mut pairs = Vec::new();
    let mut unmatched_detections = Vec::new();
    let mut unmatched_truths = Vec::new();
    // Every detection before `next` is matched or too early for any later truth.
    let mut next = 0;
    for (ti, &t) in truth.iter().enumerate() {
        while next < detected.len() && detected[next] < t - tolerance_s {
            unmatched_detections.push(next);
            next += 1;
        }
        if next < detected.len() && detected[next] <= t + tolerance_s {
            pairs.push((next, ti));
            next += 1;
        } else {
            unmatched_truths.push(ti);
        }
    }
    unmatched_detections.extend(next..detected.len());
    Ok(MatchResult {
        pairs,
        unmatched_detections,
        unmatched_truths,
        tolerance_s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_count: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub accuracy: f64,
    pub tolerance_s: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    /// Any ratio with a zero denominator is reported as 0.
    pub fn from_counts(tp: usize, fp: usize, fn_count: usize, tn: usize, tolerance_s: f64) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_count);
        let f_measure = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            tp,
            fp,
            fn_count,
            tn,
            precision,
            recall,
            f_measure,
            accuracy: ratio(tp + tn, tp + tn + fp + fn_count),
            tolerance_s,
        }
    }
}

pub fn compute_metrics(m: &MatchResult, tn: usize) -> Metrics {
    Metrics::from_counts(m.tp(), m.fp(), m.fn_count(), tn, m.tolerance_s)
}

/// A window's extent in seconds, for negative counting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpan {
    pub start_s: f64,
    pub end_s: f64,
    pub is_event: bool,
}

impl WindowSpan {
    pub fn from_verdict(v: &WindowVerdict, window_len: usize, sample_rate_hz: f64) -> Self {
        Self {
            start_s: v.window_start as f64 / sample_rate_hz,
            end_s: (v.window_start + window_len) as f64 / sample_rate_hz,
            is_event: v.is_event(),
        }
    }
}

/// Quiet windows with no truth inside `[start − tol, end + tol]`.
pub fn count_tn(windows: &[WindowSpan], truth: &[GroundTruthEvent], tolerance_s: f64) -> Result<usize> {
    let times: Vec<f64> = truth.iter().map(|e| e.time_s).collect();
    check_sorted(&times)?;
    Ok(windows
        .iter()
        .filter(|w| !w.is_event)
        .filter(|w| {
            let lo = w.start_s - tolerance_s;
            let hi = w.end_s + tolerance_s;
            let first = times.partition_point(|&t| t < lo);
            times.get(first).is_none_or(|&t| t > hi)
        })
        .count())
}
