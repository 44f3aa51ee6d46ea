//! Block FFTs and the per-window magnitude spectrogram.

use std::f64::consts::TAU;

pub use num_complex::Complex64 as ComplexValue;

use crate::error::{Error, Result};
use crate::windowing::BlockMatrix;

/// Precomputed tables for an iterative radix-2 transform of one size.
#[derive(Debug, Clone)]
pub struct FftPlan {
    len: usize,
    twiddles: Vec<ComplexValue>,
    bit_reverse: Vec<usize>,
}

impl FftPlan {
    pub fn new(len: usize) -> Result<Self> {
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(len));
        }
        let twiddles = (0..len / 2)
            .map(|k| ComplexValue::from_polar(1.0, -TAU * k as f64 / len as f64))
            .collect();
        let bits = len.trailing_zeros();
        let bit_reverse = (0..len)
            .map(|i| i.reverse_bits() >> (usize::BITS - bits))
            .collect();
        Ok(Self {
            len,
            twiddles,
            bit_reverse,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Unnormalized forward transform of a real block into `out`.
    pub fn forward_into(&self, block: &[f64], out: &mut [ComplexValue]) -> Result<()> {
        if block.len() != self.len || out.len() != self.len {
            return Err(Error::InvalidArgument(format!(
                "plan is for length {}, got input {} / output {}",
                self.len,
                block.len(),
                out.len()
            )));
        }
        for (i, &j) in self.bit_reverse.iter().enumerate() {
            out[j] = ComplexValue::new(block[i], 0.0);
        }
        let n = self.len;
        let mut half = 1;
        while half < n {
            let stride = n / (2 * half);
            for start in (0..n).step_by(2 * half) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let a = out[start + k];
                    let b = out[start + k + half] * w;
                    out[start + k] = a + b;
                    out[start + k + half] = a - b;
                }
            }
            half *= 2;
        }
        Ok(())
    }

    pub fn forward(&self, block: &[f64]) -> Result<Vec<ComplexValue>> {
        let mut out = vec![ComplexValue::default(); self.len];
        self.forward_into(block, &mut out)?;
        Ok(out)
    }

    /// Moduli of the first `len/2 + 1` bins, written into `bins`.
    fn magnitudes_into(&self, block: &[f64], scratch: &mut [ComplexValue], bins: &mut [f64]) -> Result<()> {
        self.forward_into(block, scratch)?;
        for (b, x) in bins.iter_mut().zip(scratch.iter()) {
            *b = x.norm();
        }
        Ok(())
    }
}

/// Radix-2 FFT, `X[j] = Σ x[n]·exp(−2πi·jn/N)` with no normalization.
pub fn fft(block: &[f64]) -> Result<Vec<ComplexValue>> {
    FftPlan::new(block.len())?.forward(block)
}

/// Direct O(N²) evaluation of the same sum as [`fft`], for any length.
pub fn dft_naive(block: &[f64]) -> Vec<ComplexValue> {
    let n = block.len();
    // exp(−2πi·r/N) for every residue r of j·m mod N
    let roots: Vec<ComplexValue> = (0..n)
        .map(|r| ComplexValue::from_polar(1.0, -TAU * r as f64 / n as f64))
        .collect();
    (0..n)
        .map(|j| {
            block
                .iter()
                .enumerate()
                .map(|(m, &x)| roots[(j * m) % n] * x)
                .sum()
        })
        .collect()
}

/// One block's magnitude spectrum, DC through Nyquist.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub bins: Vec<f64>,
    /// Frequency spacing between adjacent bins.
    pub bin_hz: f64,
}

pub fn bin_count(block_len: usize) -> usize {
    block_len / 2 + 1
}

pub fn magnitude_spectrum(block: &[f64], sample_rate_hz: f64) -> Result<Spectrum> {
    let plan = FftPlan::new(block.len())?;
    let mut scratch = vec![ComplexValue::default(); block.len()];
    let mut bins = vec![0.0; bin_count(block.len())];
    plan.magnitudes_into(block, &mut scratch, &mut bins)?;
    Ok(Spectrum {
        bins,
        bin_hz: sample_rate_hz / block.len() as f64,
    })
}

/// Per-window matrix of block magnitudes: row `i` is the spectrum of block
/// `i`, column `k` is frequency bin `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Spectrogram {
    pub fn from_row_major(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows * cols != values.len() {
            return Err(Error::InvalidArgument(format!(
                "{rows}x{cols} spectrogram needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument(
                "spectrogram values must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument("ragged spectrogram rows".into()));
        }
        Self::from_row_major(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.rows).map(move |r| self.values[r * self.cols + col])
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Magnitude spectrum of every row of `m`.
pub fn spectrogram(m: &BlockMatrix) -> Result<Spectrogram> {
    let plan = FftPlan::new(m.cols())?;
    spectrogram_with(&plan, m)
}

pub fn spectrogram_with(plan: &FftPlan, m: &BlockMatrix) -> Result<Spectrogram> {
    let cols = bin_count(m.cols());
    let mut values = vec![0.0; m.rows() * cols];
    let mut scratch = vec![ComplexValue::default(); m.cols()];
    for (row, bins) in m.iter_rows().zip(values.chunks_exact_mut(cols)) {
        plan.magnitudes_into(row, &mut scratch, bins)?;
    }
    Ok(Spectrogram {
        rows: m.rows(),
        cols,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn check_mags(x: &[ComplexValue], expected: &[f64]) {
        assert_eq!(x.len(), expected.len());
        for (j, (v, e)) in x.iter().zip(expected).enumerate() {
            assert!(close(v.norm(), *e, 1e-12), "bin {j}: {} vs {e}", v.norm());
        }
    }

    #[test]
    fn dc_signal() {
        let c = 0.75;
        let x = [c; 8];
        let mut expected = [0.0; 8];
        expected[0] = 8.0 * c;
        check_mags(&fft(&x).unwrap(), &expected);
        check_mags(&dft_naive(&x), &expected);
    }

    #[test]
    fn impulse_is_flat() {
        let mut x = [0.0; 8];
        x[0] = 1.0;
        check_mags(&fft(&x).unwrap(), &[1.0; 8]);
        check_mags(&dft_naive(&x), &[1.0; 8]);
    }

    #[test]
    fn single_tone() {
        let x: Vec<f64> = (0..8).map(|n| (TAU * n as f64 / 8.0).cos()).collect();
        let expected = [0.0, 4.0, 0.0, 0.0, 0.0, 0.0, 0.0, 4.0];
        check_mags(&fft(&x).unwrap(), &expected);
        check_mags(&dft_naive(&x), &expected);
    }

    #[test]
    fn naive_length_one() {
        assert_eq!(dft_naive(&[2.5]), vec![ComplexValue::new(2.5, 0.0)]);
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(matches!(fft(&[1.0; 6]), Err(Error::NotPowerOfTwo(6))));
        assert!(matches!(fft(&[1.0]), Err(Error::NotPowerOfTwo(1))));
        assert!(fft(&[]).is_err());
        assert!(magnitude_spectrum(&[0.0; 100], 6000.0).is_err());
    }

    #[test]
    fn spectrum_shape() {
        let s = magnitude_spectrum(&[0.0; 128], 6000.0).unwrap();
        assert_eq!(s.bins.len(), 65);
        assert!(s.bins.iter().all(|&b| b == 0.0));
        assert_eq!(s.bin_hz, 6000.0 / 128.0);
    }

    #[test]
    fn spectrogram_shapes() {
        let m = BlockMatrix::from_row_major(47, 128, (0..6016).map(|i| (i as f64 * 0.1).sin()).collect())
            .unwrap();
        let f = spectrogram(&m).unwrap();
        assert_eq!((f.rows(), f.cols()), (47, 65));

        let m = BlockMatrix::from_row_major(2, 4, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let f = spectrogram(&m).unwrap();
        assert_eq!(f.row(0), &[1.0, 1.0, 1.0]);
        assert_eq!(f.row(1), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn identical_rows_give_identical_spectra() {
        let row: Vec<f64> = (0..16).map(|i| (i as f64).sqrt()).collect();
        let m = BlockMatrix::from_row_major(3, 16, row.repeat(3)).unwrap();
        let f = spectrogram(&m).unwrap();
        assert_eq!(f.row(0), f.row(1));
        assert_eq!(f.row(1), f.row(2));
    }

    fn vec_pow2() -> impl Strategy<Value = Vec<f64>> {
        (1u32..8).prop_flat_map(|p| prop::collection::vec(-1.0f64..1.0, 1usize << p))
    }

    proptest! {
        #[test]
        fn spectrum_scales_linearly(x in vec_pow2(), alpha in 0.0f64..10.0) {
            let base = magnitude_spectrum(&x, 1.0).unwrap();
            let scaled: Vec<f64> = x.iter().map(|v| v * alpha).collect();
            let got = magnitude_spectrum(&scaled, 1.0).unwrap();
            for (a, b) in got.bins.iter().zip(&base.bins) {
                prop_assert!(close(*a, alpha * b, 1e-9 * (1.0 + alpha * b)));
            }
        }

        #[test]
        fn fft_is_linear(pair in (1u32..8).prop_flat_map(|p| {
            let n = 1usize << p;
            (prop::collection::vec(-1.0f64..1.0, n), prop::collection::vec(-1.0f64..1.0, n))
        }), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let (x, y) = pair;
            let mix: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
            let (fx, fy, fm) = (fft(&x).unwrap(), fft(&y).unwrap(), fft(&mix).unwrap());
            for j in 0..x.len() {
                prop_assert!((fm[j] - (fx[j] * a + fy[j] * b)).norm() <= 1e-9);
            }
        }

        #[test]
        fn real_input_is_conjugate_symmetric(x in vec_pow2()) {
            let fx = fft(&x).unwrap();
            let n = x.len();
            for j in 1..n {
                prop_assert!(close(fx[j].norm(), fx[n - j].norm(), 1e-12));
            }
        }
    }
}
