//! Crosstalk correction for two-color heterodyne interferometry.
//!
//! Synthetic signal generation, whitening, fastICA separation, IQ phase
//! demodulation, two-color density recovery, FIR+ICA frequency diplexing
//! and quality metrics.

pub mod demod;
pub mod diplexer;
pub mod error;
pub mod fastica;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod preprocess;
pub mod rng;
pub mod signal;
pub mod signalgen;
pub mod spectrum;

pub use demod::{DemodConfig, DensitySeries, PhaseSeries};
pub use error::{Error, Result, SampleRange};
pub use fastica::{Contrast, FastIcaConfig, Orthogonalization, SeparationResult};
pub use metrics::{Db, QualityReport};
pub use preprocess::WhiteningTransform;
pub use signal::MultichannelSignal;
pub use signalgen::{InterferometerParams, MixingModel, PhaseTrack, ScenarioKind};
