use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: no valid samples")]
    NoSamples { path: PathBuf },

    #[error("{path}: malformed header: {detail}")]
    MalformedHeader { path: PathBuf, detail: String },

    #[error("{path}: raw file length {len} is not a multiple of {width} bytes")]
    TruncatedRaw { path: PathBuf, len: u64, width: usize },

    #[error("line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length {0} is not a power of two >= 2")]
    NotPowerOfTwo(usize),

    #[error("window length {window_len} is not divisible by block length {block_len}")]
    IndivisibleBlock { window_len: usize, block_len: usize },

    #[error("series of length {len} is shorter than required {required}")]
    TooShort { len: usize, required: usize },

    #[error("bin index {index} out of range for {bins} bins")]
    BinOutOfRange { index: usize, bins: usize },

    #[error("input events are not sorted by time")]
    Unsorted,
}
