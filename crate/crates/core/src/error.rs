use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// A contiguous run of samples, `start..end` (end exclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleRange {
    pub start: usize,
    pub end: usize,
}

impl std::fmt::Display for SampleRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("frequency {freq} Hz is not below the Nyquist limit {nyquist} Hz")]
    Nyquist { freq: f64, nyquist: f64 },

    #[error("matrix is singular or too ill-conditioned (|det| = {0:e})")]
    Singular(f64),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("input is not centered (channel {channel} mean {mean:e})")]
    NotCentered { channel: usize, mean: f64 },

    #[error("input is not standardized (mean {mean:e}, variance {variance})")]
    NotStandardized { mean: f64, variance: f64 },

    #[error("rank-deficient input: eigenvalue {eigval:e} at or below threshold {threshold:e}; channels are linearly dependent")]
    RankDeficient { eigval: f64, threshold: f64 },

    #[error("channel {0} has zero power")]
    ZeroPower(usize),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("fastICA did not converge for unit(s) {units:?} within {max_iter} iterations")]
    NotConverged { units: Vec<usize>, max_iter: usize },

    #[error("component identification failed: labels {first} and {second} both resolve to component {component}")]
    IdentificationCollision {
        first: usize,
        second: usize,
        component: usize,
    },

    #[error("phase tracking lost on sample range(s) {}", fmt_ranges(.ranges))]
    TrackingLost { ranges: Vec<SampleRange> },

    #[error("zero envelope: nothing to measure")]
    ZeroEnvelope,

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_ranges(ranges: &[SampleRange]) -> String {
    ranges
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}
