//! Fixed-length analysis windows and their block-matrix view.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_io::SampleStream;

pub const DEFAULT_WINDOW_LEN: usize = 6016;
pub const DEFAULT_STEP: usize = 6016;
pub const DEFAULT_BLOCK_LEN: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowingConfig {
    pub window_len: usize,
    pub step: usize,
    pub block_len: usize,
}

impl Default for WindowingConfig {
    fn default() -> Self {
        Self {
            window_len: DEFAULT_WINDOW_LEN,
            step: DEFAULT_STEP,
            block_len: DEFAULT_BLOCK_LEN,
        }
    }
}

impl WindowingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_len == 0 || self.step == 0 || self.block_len == 0 {
            return Err(Error::InvalidArgument(
                "window, step and block lengths must be positive".into(),
            ));
        }
        if self.window_len % self.block_len != 0 {
            return Err(Error::IndivisibleBlock {
                window_len: self.window_len,
                block_len: self.block_len,
            });
        }
        Ok(())
    }

    pub fn blocks_per_window(&self) -> usize {
        self.window_len / self.block_len
    }

    /// Number of complete windows over `n` samples.
    pub fn window_count(&self, n: usize) -> usize {
        if n < self.window_len {
            0
        } else {
            (n - self.window_len) / self.step + 1
        }
    }
}

/// A borrowed slice of the parent stream starting at `start_index`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window<'a> {
    pub start_index: usize,
    pub samples: &'a [f64],
}

/// Windows at `0, step, 2·step, …`; a trailing partial window is dropped.
pub fn windows<'a>(
    stream: &'a SampleStream,
    cfg: &WindowingConfig,
) -> impl ExactSizeIterator<Item = Window<'a>> + 'a {
    let samples = stream.samples();
    let (len, step) = (cfg.window_len, cfg.step);
    (0..cfg.window_count(samples.len())).map(move |i| {
        let start = i * step;
        Window {
            start_index: start,
            samples: &samples[start..start + len],
        }
    })
}

/// A window reshaped row-major into `rows × cols`; row `r` is block `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl BlockMatrix {
    pub fn from_row_major(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows * cols != values.len() {
            return Err(Error::InvalidArgument(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        Ok(Self { rows, cols, values })
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

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.cols.max(1))
    }

    /// Row-major flattening; the inverse of the reshape.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

pub fn to_block_matrix(window: &Window<'_>, block_len: usize) -> Result<BlockMatrix> {
    let len = window.samples.len();
    if block_len == 0 || len % block_len != 0 {
        return Err(Error::IndivisibleBlock {
            window_len: len,
            block_len,
        });
    }
    BlockMatrix::from_row_major(len / block_len, block_len, window.samples.to_vec())
}
