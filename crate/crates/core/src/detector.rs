//! Tukey's-fences event detection over windowed spectrograms.
//!
//! Per window: pick the frequency bin whose mean magnitude differs most
//! between the first and second half of the window, run a short forward
//! standard deviation along that bin, and flag the window if any deviation
//! falls outside `[Q1 − k·IQR, Q3 + k·IQR]`. Runs of consecutive flagged
//! windows become one event, stamped at the first outlying block.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_io::SampleStream;
use crate::spectral::{spectrogram_with, FftPlan, Spectrogram};
use crate::windowing::{to_block_matrix, windows, Window, WindowingConfig};

pub const DEFAULT_K: f64 = 0.5;
pub const DEFAULT_STD_WINDOW: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Tukey constant scaling the interquartile range.
    pub k: f64,
    /// Points per forward standard deviation.
    pub std_window: usize,
    pub windowing: WindowingConfig,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            std_window: DEFAULT_STD_WINDOW,
            windowing: WindowingConfig::default(),
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        self.windowing.validate()?;
        let block_len = self.windowing.block_len;
        if block_len < 2 || !block_len.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(block_len));
        }
        if !(self.k.is_finite() && self.k >= 0.0) {
            return Err(Error::InvalidArgument(format!("k must be >= 0, got {}", self.k)));
        }
        let rows = self.windowing.blocks_per_window();
        if rows < 2 {
            return Err(Error::InvalidArgument(format!(
                "a window needs at least 2 blocks, got {rows}"
            )));
        }
        if self.std_window < 2 || self.std_window > rows {
            return Err(Error::InvalidArgument(format!(
                "std window must be in [2, {rows}], got {}",
                self.std_window
            )));
        }
        Ok(())
    }
}

/// Mean-difference score per bin and the winning bin.
#[derive(Debug, Clone, PartialEq)]
pub struct BinSelection {
    pub selected_bin: usize,
    pub delta_p: f64,
    pub per_bin_delta: Vec<f64>,
}

/// `|mean(left half) − mean(right half)|` for every column of `f`.
///
/// Both halves hold `rows / 2` rows; with an odd row count the middle row
/// belongs to neither.
pub fn delta_p(f: &Spectrogram) -> Result<Vec<f64>> {
    let rows = f.rows();
    if rows < 2 {
        return Err(Error::TooShort { len: rows, required: 2 });
    }
    let half = rows / 2;
    let mut left = vec![0.0; f.cols()];
    let mut right = vec![0.0; f.cols()];
    for r in 0..half {
        for (acc, v) in left.iter_mut().zip(f.row(r)) {
            *acc += v;
        }
        for (acc, v) in right.iter_mut().zip(f.row(rows - half + r)) {
            *acc += v;
        }
    }
    let n = half as f64;
    Ok(left
        .iter()
        .zip(&right)
        .map(|(l, r)| (l / n - r / n).abs())
        .collect())
}

/// Argmax of [`delta_p`]; ties go to the lowest bin.
pub fn select_bin(f: &Spectrogram) -> Result<BinSelection> {
    let per_bin_delta = delta_p(f)?;
    let mut selected_bin = 0;
    let mut best = f64::NEG_INFINITY;
    for (k, &d) in per_bin_delta.iter().enumerate() {
        if d > best {
            best = d;
            selected_bin = k;
        }
    }
    Ok(BinSelection {
        selected_bin,
        delta_p: best.max(0.0),
        per_bin_delta,
    })
}

/// Column `bin` of `f`, one value per block.
pub fn extract_series(f: &Spectrogram, bin: usize) -> Result<Vec<f64>> {
    if bin >= f.cols() {
        return Err(Error::BinOutOfRange {
            index: bin,
            bins: f.cols(),
        });
    }
    Ok(f.column(bin).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSeries(Vec<f64>);

impl SigmaSeries {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Population standard deviation of each run `x[t..t+w]`, for
/// `t = 0..=len−w`.
pub fn forward_std(x: &[f64], w: usize) -> Result<SigmaSeries> {
    if w == 0 {
        return Err(Error::InvalidArgument("std window must be >= 1".into()));
    }
    if x.len() < w {
        return Err(Error::TooShort {
            len: x.len(),
            required: w,
        });
    }
    let n = w as f64;
    let values = x
        .windows(w)
        .map(|run| {
            let mean = run.iter().sum::<f64>() / n;
            let var = run.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            var.sqrt()
        })
        .collect();
    Ok(SigmaSeries(values))
}

fn check_q(q: f64) -> Result<()> {
    if (0.0..=1.0).contains(&q) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("quantile {q} outside [0, 1]")))
    }
}

/// Linear interpolation between order statistics at position `(n−1)·q` of an
/// ascending slice.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let p = (sorted.len() - 1) as f64 * q;
    let lo = p.floor() as usize;
    let hi = p.ceil() as usize;
    sorted[lo] + (p - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted_finite(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("quantile of an empty series".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("quantile input must be finite".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted)
}

pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    check_q(q)?;
    Ok(quantile_sorted(&sorted_finite(values)?, q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TukeyFences {
    pub q1: f64,
    pub q3: f64,
    pub k: f64,
    pub lo: f64,
    pub hi: f64,
}

impl TukeyFences {
    /// Closed-interval membership; values on a fence are not outliers.
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

pub fn tukey_fences(sigma: &SigmaSeries, k: f64) -> Result<TukeyFences> {
    if !(k.is_finite() && k >= 0.0) {
        return Err(Error::InvalidArgument(format!("k must be >= 0, got {k}")));
    }
    let sorted = sorted_finite(sigma.values())?;
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    Ok(TukeyFences {
        q1,
        q3,
        k,
        lo: q1 - k * iqr,
        hi: q3 + k * iqr,
    })
}

/// Index of the first value outside the fences; `None` means a quiet window.
pub fn classify_window(sigma: &SigmaSeries, fences: &TukeyFences) -> Option<usize> {
    sigma.values().iter().position(|&s| !fences.contains(s))
}

/// Everything the detector decided about one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowVerdict {
    pub window_start: usize,
    /// Block index `t` of the first outlying deviation, if any.
    pub first_outlier_block: Option<usize>,
    pub selection: BinSelection,
    pub fences: TukeyFences,
}

impl WindowVerdict {
    pub fn is_event(&self) -> bool {
        self.first_outlier_block.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedEvent {
    pub sample_index: usize,
    /// `sample_index / sample_rate`, relative to the first sample.
    pub time_s: f64,
    /// Start indices of the first and last flagged window merged here.
    pub window_span: (usize, usize),
}

impl DetectedEvent {
    pub fn window_start(&self) -> usize {
        self.window_span.0
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionOutput {
    pub events: Vec<DetectedEvent>,
    /// One entry per analysed window, ordered by `window_start`.
    pub verdicts: Vec<WindowVerdict>,
}

/// Runs the full per-window chain on one window.
pub fn analyze_window(window: &Window<'_>, plan: &FftPlan, cfg: &DetectorConfig) -> Result<WindowVerdict> {
    let blocks = to_block_matrix(window, cfg.windowing.block_len)?;
    let spec = spectrogram_with(plan, &blocks)?;
    let selection = select_bin(&spec)?;
    let series = extract_series(&spec, selection.selected_bin)?;
    let sigma = forward_std(&series, cfg.std_window)?;
    let fences = tukey_fences(&sigma, cfg.k)?;
    Ok(WindowVerdict {
        window_start: window.start_index,
        first_outlier_block: classify_window(&sigma, &fences),
        selection,
        fences,
    })
}

/// Detects events in `stream`. A stream shorter than one window yields no
/// verdicts and no events.
pub fn detect(stream: &SampleStream, cfg: &DetectorConfig) -> Result<DetectionOutput> {
    cfg.validate()?;
    let plan = FftPlan::new(cfg.windowing.block_len)?;
    let all: Vec<Window<'_>> = windows(stream, &cfg.windowing).collect();
    let verdicts = all
        .par_iter()
        .map(|w| analyze_window(w, &plan, cfg))
        .collect::<Result<Vec<_>>>()?;
    let events = merge_verdicts(&verdicts, cfg.windowing.block_len, stream.sample_rate_hz());
    Ok(DetectionOutput { events, verdicts })
}

/// Collapses runs of consecutive flagged verdicts into events.
///
/// With overlapping windows a later run can localize at or before the
/// previous event's sample; such a run is folded into the previous event so
/// the output stays strictly increasing.
pub fn merge_verdicts(verdicts: &[WindowVerdict], block_len: usize, sample_rate_hz: f64) -> Vec<DetectedEvent> {
    let mut events: Vec<DetectedEvent> = Vec::new();
    let mut prev_flagged = false;
    for v in verdicts {
        match v.first_outlier_block {
            Some(block) if !prev_flagged => {
                let sample_index = v.window_start + block * block_len;
                match events.last_mut() {
                    Some(last) if sample_index <= last.sample_index => {
                        last.window_span.1 = v.window_start;
                    }
                    _ => events.push(DetectedEvent {
                        sample_index,
                        time_s: sample_index as f64 / sample_rate_hz,
                        window_span: (v.window_start, v.window_start),
                    }),
                }
            }
            Some(_) => {
                if let Some(last) = events.last_mut() {
                    last.window_span.1 = v.window_start;
                }
            }
            None => {}
        }
        prev_flagged = v.is_event();
    }
    events
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_io::{generate_synthetic, SyntheticSpec};
    use proptest::prelude::*;

    fn spectro(rows: &[&[f64]]) -> Spectrogram {
        Spectrogram::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    /// 47×`cols` spectrogram with `f(row, col)` entries.
    fn spectro_fn(cols: usize, f: impl Fn(usize, usize) -> f64) -> Spectrogram {
        let values = (0..47).flat_map(|r| (0..cols).map(move |c| (r, c))).map(|(r, c)| f(r, c)).collect();
        Spectrogram::from_row_major(47, cols, values).unwrap()
    }

    #[test]
    fn delta_p_examples() {
        let f = spectro_fn(3, |_, c| [2.0, 5.0, 0.0][c]);
        assert_eq!(delta_p(&f).unwrap(), vec![0.0, 0.0, 0.0]);

        // column 1: 0 on rows 0..=22, 10 on rows 24..=46, middle row arbitrary
        let f = spectro_fn(2, |r, c| match (c, r) {
            (1, r) if r < 23 => 0.0,
            (1, 23) => 1234.0,
            (1, _) => 10.0,
            _ => 1.0,
        });
        assert_eq!(delta_p(&f).unwrap(), vec![0.0, 10.0]);

        let shifted = spectro_fn(2, |r, c| match (c, r) {
            (1, r) if r < 23 => 3.0,
            (1, 23) => 1237.0,
            (1, _) => 13.0,
            _ => 1.0,
        });
        assert_eq!(delta_p(&shifted).unwrap(), vec![0.0, 10.0]);
    }

    #[test]
    fn delta_p_even_rows_split_in_half() {
        let f = spectro(&[&[1.0], &[3.0], &[5.0], &[11.0]]);
        assert_eq!(delta_p(&f).unwrap(), vec![6.0]);
        let single = spectro(&[&[1.0, 2.0]]);
        assert!(matches!(delta_p(&single), Err(Error::TooShort { .. })));
    }

    #[test]
    fn select_bin_examples() {
        let zero = spectro_fn(65, |_, _| 0.0);
        let sel = select_bin(&zero).unwrap();
        assert_eq!((sel.selected_bin, sel.delta_p), (0, 0.0));
        assert_eq!(sel.per_bin_delta.len(), 65);

        let f = spectro_fn(6, |r, c| match c {
            3 if r > 23 => 10.0,
            3 => 0.0,
            _ => 1.0,
        });
        let sel = select_bin(&f).unwrap();
        assert_eq!((sel.selected_bin, sel.delta_p), (3, 10.0));
        assert_eq!(select_bin(&f.scaled(0.37)).unwrap().selected_bin, 3);
    }

    #[test]
    fn extract_series_examples() {
        let f = spectro(&[&[0.0, 1.0], &[0.0, 2.0], &[0.0, 3.0]]);
        assert_eq!(extract_series(&f, 1).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(extract_series(&f, 0).unwrap(), vec![0.0; 3]);
        assert!(matches!(extract_series(&f, 2), Err(Error::BinOutOfRange { .. })));
        let tall = spectro_fn(65, |r, _| r as f64);
        assert_eq!(extract_series(&tall, 64).unwrap().len(), 47);
    }

    #[test]
    fn forward_std_examples() {
        let s = forward_std(&[2.5; 10], 4).unwrap();
        assert_eq!(s.values(), &[0.0; 7]);

        // mean 1, squared deviations 1+1+1+9 = 12, 12/4 = 3
        let s = forward_std(&[0.0, 0.0, 0.0, 4.0], 4).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s.values()[0] - 3f64.sqrt()).abs() < 1e-15);
        assert!((s.values()[0] - 1.7320508).abs() < 1e-7);

        let x = [1.0, 4.0, 2.0, 8.0, 5.0, 7.0];
        let shifted: Vec<f64> = x.iter().map(|v| v + 16.0).collect();
        assert_eq!(forward_std(&x, 4).unwrap(), forward_std(&shifted, 4).unwrap());

        assert!(matches!(forward_std(&[1.0, 2.0], 4), Err(Error::TooShort { .. })));
        assert!(forward_std(&[1.0], 0).is_err());
    }

    #[test]
    fn quantile_examples() {
        let v = [1.0, 2.0, 3.0, 4.0, 100.0];
        assert_eq!(quantile(&v, 0.25).unwrap(), 2.0);
        assert_eq!(quantile(&v, 0.75).unwrap(), 4.0);
        assert_eq!(quantile(&[7.5], 0.3).unwrap(), 7.5);
        assert_eq!(quantile(&[4.0, 1.0, 3.0, 2.0], 0.5).unwrap(), 2.5);
        assert!(quantile(&[], 0.5).is_err());
        assert!(quantile(&[1.0], 1.5).is_err());
        assert!(quantile(&[1.0], -0.1).is_err());
        assert!(quantile(&[f64::NAN], 0.5).is_err());
    }

    #[test]
    fn fences_examples() {
        let s = SigmaSeries::new(vec![1.0, 2.0, 3.0, 4.0, 100.0]);
        let f = tukey_fences(&s, 0.5).unwrap();
        assert_eq!((f.q1, f.q3, f.lo, f.hi), (2.0, 4.0, 1.0, 5.0));
        assert_eq!(classify_window(&s, &f), Some(4));

        let flat = SigmaSeries::new(vec![0.3; 5]);
        let f = tukey_fences(&flat, 0.5).unwrap();
        assert_eq!((f.lo, f.hi), (0.3, 0.3));
        assert_eq!(classify_window(&flat, &f), None);

        let f = tukey_fences(&s, 0.0).unwrap();
        assert_eq!((f.lo, f.hi), (2.0, 4.0));

        let inside = SigmaSeries::new(vec![2.0, 3.0, 4.0]);
        let fixed = TukeyFences { q1: 2.0, q3: 4.0, k: 0.5, lo: 1.0, hi: 5.0 };
        assert_eq!(classify_window(&inside, &fixed), None);

        assert!(tukey_fences(&SigmaSeries::new(vec![]), 0.5).is_err());
        assert!(tukey_fences(&s, -1.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(DetectorConfig::default().validate().is_ok());
        let bad = [
            DetectorConfig { k: -0.1, ..Default::default() },
            DetectorConfig { std_window: 1, ..Default::default() },
            DetectorConfig { std_window: 48, ..Default::default() },
            DetectorConfig {
                windowing: WindowingConfig { window_len: 6000, step: 6000, block_len: 120 },
                ..Default::default()
            },
            DetectorConfig {
                windowing: WindowingConfig { window_len: 128, step: 128, block_len: 128 },
                std_window: 1,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    fn verdict(start: usize, block: Option<usize>) -> WindowVerdict {
        WindowVerdict {
            window_start: start,
            first_outlier_block: block,
            selection: BinSelection { selected_bin: 0, delta_p: 0.0, per_bin_delta: vec![] },
            fences: TukeyFences { q1: 0.0, q3: 0.0, k: 0.5, lo: 0.0, hi: 0.0 },
        }
    }

    #[test]
    fn merge_runs() {
        let v = vec![
            verdict(0, None),
            verdict(100, Some(2)),
            verdict(200, Some(0)),
            verdict(300, None),
            verdict(400, Some(1)),
        ];
        let ev = merge_verdicts(&v, 10, 10.0);
        assert_eq!(ev.len(), 2);
        assert_eq!((ev[0].sample_index, ev[0].window_span), (120, (100, 200)));
        assert_eq!(ev[0].time_s, 12.0);
        assert_eq!((ev[1].sample_index, ev[1].window_span), (410, (400, 400)));
    }

    #[test]
    fn merge_keeps_events_increasing_with_overlap() {
        // overlapping windows: second run localizes before the first event
        let v = vec![verdict(0, Some(40)), verdict(128, None), verdict(256, Some(0))];
        let ev = merge_verdicts(&v, 128, 6000.0);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].window_span, (0, 256));
    }

    #[test]
    fn noiseless_sine_has_no_events() {
        let spec = SyntheticSpec { duration_s: 30.0, ..Default::default() };
        let (stream, _) = generate_synthetic(&spec).unwrap();
        let out = detect(&stream, &DetectorConfig::default()).unwrap();
        assert_eq!(out.verdicts.len(), stream.len() / 6016);
        assert!(out.events.is_empty(), "{:?}", out.events);
    }

    #[test]
    fn short_stream_is_empty_not_error() {
        let stream = SampleStream::new(vec![0.0; 6015], 6000.0).unwrap();
        let out = detect(&stream, &DetectorConfig::default()).unwrap();
        assert!(out.events.is_empty() && out.verdicts.is_empty());
    }

    proptest! {
        #[test]
        fn argmax_invariant_under_power_of_two_scaling(
            values in prop::collection::vec(0.0f64..100.0, 47 * 9),
            exp in -20i32..20,
        ) {
            let f = Spectrogram::from_row_major(47, 9, values).unwrap();
            let alpha = 2f64.powi(exp);
            prop_assert_eq!(select_bin(&f).unwrap().selected_bin, select_bin(&f.scaled(alpha)).unwrap().selected_bin);
        }

        #[test]
        fn argmax_invariant_with_clear_winner(
            values in prop::collection::vec(0.0f64..1.0, 47 * 9),
            winner in 0usize..9,
            alpha in 1e-3f64..1e3,
        ) {
            let mut rows: Vec<Vec<f64>> = values.chunks(9).map(<[f64]>::to_vec).collect();
            for row in rows.iter_mut().skip(24) {
                row[winner] += 5.0;
            }
            let f = Spectrogram::from_rows(&rows).unwrap();
            let sel = select_bin(&f).unwrap();
            prop_assert_eq!(sel.selected_bin, winner);
            prop_assert_eq!(select_bin(&f.scaled(alpha)).unwrap().selected_bin, winner);
        }

        #[test]
        fn sigma_nonnegative_and_sized(x in prop::collection::vec(-1e3f64..1e3, 4..80), w in 1usize..5) {
            let s = forward_std(&x, w).unwrap();
            prop_assert_eq!(s.len(), x.len() - w + 1);
            prop_assert!(s.values().iter().all(|v| *v >= 0.0));
        }

        #[test]
        fn verdict_invariant_under_sigma_shift(
            sigma in prop::collection::vec(0u32..64, 1..50),
            shift in 0u32..1000,
            k_quarters in 0u32..12,
        ) {
            // integer values, dyadic k: every operation is exact
            let k = k_quarters as f64 / 4.0;
            let base = SigmaSeries::new(sigma.iter().map(|&v| v as f64).collect());
            let moved = SigmaSeries::new(sigma.iter().map(|&v| (v + shift) as f64).collect());
            let fb = tukey_fences(&base, k).unwrap();
            let fm = tukey_fences(&moved, k).unwrap();
            prop_assert_eq!(classify_window(&base, &fb), classify_window(&moved, &fm));
        }

        #[test]
        fn fences_are_ordered(v in prop::collection::vec(-1e6f64..1e6, 1..200), k in 0.0f64..5.0) {
            let f = tukey_fences(&SigmaSeries::new(v), k).unwrap();
            prop_assert!(f.lo <= f.q1 && f.q1 <= f.q3 && f.q3 <= f.hi);
        }
    }
}
