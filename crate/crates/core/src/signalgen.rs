//! Synthetic two-color heterodyne interferometer signals.
//!
//! Carriers are generated at the downconverted intermediate frequency, phase
//! modulated by density and vibration tracks, then optionally coupled through a
//! crosstalk matrix, corrupted with white gaussian noise and quantized by an
//! ideal ADC. Noise streams come from [`crate::rng::SeededRng`].

use std::f64::consts::{PI, TAU};
use std::str::FromStr;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg;
use crate::signal::{mean_square, MultichannelSignal};
use crate::rng::SeededRng;

/// CODATA classical electron radius, meters.
pub const CLASSICAL_ELECTRON_RADIUS: f64 = 2.8179403262e-15;
/// CO2 laser wavelength, meters.
pub const CO2_WAVELENGTH: f64 = 10.591e-6;
/// Nd:YAG laser wavelength, meters.
pub const ND_YAG_WAVELENGTH: f64 = 1.064e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferometerParams {
    /// First (long, density-sensitive) wavelength, meters.
    pub lambda1: f64,
    /// Second (vibration-compensating) wavelength, meters.
    pub lambda2: f64,
    /// Heterodyne carrier of the first interferometer, Hz.
    pub f_het1: f64,
    /// Heterodyne carrier of the second interferometer, Hz.
    pub f_het2: f64,
    pub sample_rate: f64,
    /// Classical electron radius, meters.
    pub r_e: f64,
}

impl Default for InterferometerParams {
    /// CO2 / Nd:YAG pair downconverted to 1.0 and 1.1 MHz, sampled at 8 MSPS.
    fn default() -> Self {
        Self {
            lambda1: CO2_WAVELENGTH,
            lambda2: ND_YAG_WAVELENGTH,
            f_het1: 1.0e6,
            f_het2: 1.1e6,
            sample_rate: 8.0e6,
            r_e: CLASSICAL_ELECTRON_RADIUS,
        }
    }
}

impl InterferometerParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.lambda1) || !positive(self.lambda2) {
            return Err(Error::InvalidParameter("wavelengths must be positive".into()));
        }
        if self.lambda1 == self.lambda2 {
            return Err(Error::InvalidParameter(
                "the two wavelengths must differ".into(),
            ));
        }
        if !positive(self.r_e) {
            return Err(Error::InvalidParameter("r_e must be positive".into()));
        }
        if !positive(self.sample_rate) {
            return Err(Error::InvalidParameter("sample rate must be positive".into()));
        }
        let nyquist = self.sample_rate / 2.0;
        for f in [self.f_het1, self.f_het2] {
            if !positive(f) || f >= nyquist {
                return Err(Error::Nyquist { freq: f, nyquist });
            }
        }
        Ok(())
    }

    pub fn carriers(&self) -> [f64; 2] {
        [self.f_het1, self.f_het2]
    }

    /// Phase shift `r_e * lambda * density` accumulated by a beam of the given
    /// wavelength crossing a line-integrated density (m^-2).
    pub fn density_phase(&self, lambda: f64, line_density: f64) -> f64 {
        self.r_e * lambda * line_density
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackLabel {
    Density,
    Vibration,
    Combined,
}

/// Carrier phase displacement in radians, one value per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrack {
    pub samples: Vec<f64>,
    pub label: TrackLabel,
}

impl PhaseTrack {
    pub fn new(samples: Vec<f64>, label: TrackLabel) -> Result<Self> {
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("phase track"));
        }
        Ok(Self { samples, label })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            samples: vec![0.0; n],
            label: TrackLabel::Combined,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Square crosstalk matrix `A` with `S = A * Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingModel {
    a: Array2<f64>,
}

impl MixingModel {
    pub const DEFAULT_DET_THRESHOLD: f64 = 1e-6;

    pub fn new(a: Array2<f64>) -> Result<Self> {
        Self::with_threshold(a, Self::DEFAULT_DET_THRESHOLD)
    }

    pub fn with_threshold(a: Array2<f64>, det_threshold: f64) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "mixing matrix must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mixing matrix"));
        }
        let det = linalg::determinant(&a);
        if det.abs() <= det_threshold {
            return Err(Error::Singular(det.abs()));
        }
        Ok(Self { a })
    }

    pub fn identity(c: usize) -> Self {
        Self { a: Array2::eye(c) }
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn inverse(&self) -> Result<Self> {
        Ok(Self {
            a: linalg::invert(&self.a)?,
        })
    }
}

impl FromStr for MixingModel {
    type Err = Error;

    /// Parses rows separated by `;` and entries by `,`, e.g. `1,0.4;0.3,1`.
    fn from_str(s: &str) -> Result<Self> {
        let rows: Vec<Vec<f64>> = s
            .split(';')
            .map(|row| {
                row.split(',')
                    .map(|v| {
                        v.trim().parse::<f64>().map_err(|_| {
                            Error::InvalidParameter(format!("bad matrix entry `{}`", v.trim()))
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let c = rows.len();
        if rows.iter().any(|r| r.len() != c) {
            return Err(Error::DimensionMismatch(format!(
                "coupling matrix `{s}` is not square"
            )));
        }
        let a = Array2::from_shape_vec((c, c), rows.concat())
            .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        Self::new(a)
    }
}

impl std::fmt::Display for MixingModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let rows: Vec<String> = self
            .a
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
            .collect();
        f.write_str(&rows.join(";"))
    }
}

/// Generates the two unit-amplitude interference carriers
/// `y_i[k] = sin(2 pi f_het,i k / fs + track_i[k])`.
pub fn synth_clean_pair(
    params: &InterferometerParams,
    track1: &PhaseTrack,
    track2: &PhaseTrack,
    n: usize,
) -> Result<MultichannelSignal> {
    params.validate()?;
    if track1.len() != n || track2.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "phase tracks have lengths {} and {}, expected {n}",
            track1.len(),
            track2.len()
        )));
    }
    let mut data = Array2::<f64>::zeros((2, n));
    for (row, (f, track)) in [(params.f_het1, track1), (params.f_het2, track2)]
        .into_iter()
        .enumerate()
    {
        let w = TAU * f / params.sample_rate;
        for (k, out) in data.row_mut(row).iter_mut().enumerate() {
            // Reduce the carrier argument before adding the track so long
            // records keep full phase precision.
            let carrier = (w * k as f64) % TAU;
            *out = (carrier + track.samples[k]).sin();
        }
    }
    MultichannelSignal::new(data, params.sample_rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    /// No phase modulation at all.
    Quiet,
    /// Mechanical vibration only; the two-color density is identically zero.
    VibrationOnly,
    /// Vibration plus a trapezoidal density pulse.
    ShotRamp,
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quiet" => Ok(Self::Quiet),
            "vibration-only" => Ok(Self::VibrationOnly),
            "shot-ramp" => Ok(Self::ShotRamp),
            other => Err(Error::UnknownScenario(other.to_string())),
        }
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Quiet => "quiet",
            Self::VibrationOnly => "vibration-only",
            Self::ShotRamp => "shot-ramp",
        })
    }
}

/// Shape parameters of the synthetic discharge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// Plateau line-integrated density, m^-2.
    pub plateau_density: f64,
    /// Peak optical path displacement of the vibration, meters.
    pub vibration_amplitude: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::ShotRamp,
            plateau_density: 5.0e19,
            vibration_amplitude: 0.5e-6,
        }
    }
}

/// Phase tracks for both interferometers plus the density that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTracks {
    pub track1: PhaseTrack,
    pub track2: PhaseTrack,
    /// Ground-truth line-integrated density, m^-2.
    pub density: Vec<f64>,
}

// (relative amplitude, frequency in Hz) of the vibration components.
const VIBRATION_TONES: [(f64, f64); 3] = [(0.6, 97.0), (0.3, 231.0), (0.1, 563.0)];

/// Trapezoid: rises over 10..30 % of the record, holds until 70 %, falls to
/// zero at 90 %.
fn trapezoid(k: usize, n: usize) -> f64 {
    let x = k as f64 / (n - 1).max(1) as f64;
    match x {
        x if x < 0.1 => 0.0,
        x if x < 0.3 => (x - 0.1) / 0.2,
        x if x < 0.7 => 1.0,
        x if x < 0.9 => (0.9 - x) / 0.2,
        _ => 0.0,
    }
}

impl Scenario {
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    /// Builds the phase tracks.
    ///
    /// A path displacement `dl` shifts interferometer `i` by `2 pi dl / lambda_i`,
    /// so `phi1 * lambda1 = phi2 * lambda2` for the vibration part. The density
    /// shifts each by `r_e * lambda_i * density`.
    pub fn tracks(&self, params: &InterferometerParams, n: usize) -> Result<ScenarioTracks> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "scenario needs at least 2 samples, got {n}"
            )));
        }
        params.validate()?;
        let fs = params.sample_rate;
        let displacement: Vec<f64> = match self.kind {
            ScenarioKind::Quiet => vec![0.0; n],
            ScenarioKind::VibrationOnly | ScenarioKind::ShotRamp => (0..n)
                .map(|k| {
                    let t = k as f64 / fs;
                    self.vibration_amplitude
                        * VIBRATION_TONES
                            .iter()
                            .map(|(a, f)| a * (TAU * f * t).sin())
                            .sum::<f64>()
                })
                .collect(),
        };
        let density: Vec<f64> = match self.kind {
            ScenarioKind::ShotRamp => (0..n)
                .map(|k| self.plateau_density * trapezoid(k, n))
                .collect(),
            _ => vec![0.0; n],
        };
        let track = |lambda: f64| -> Vec<f64> {
            displacement
                .iter()
                .zip(&density)
                .map(|(dl, ne)| 2.0 * PI * dl / lambda + params.density_phase(lambda, *ne))
                .collect()
        };
        let (label1, label2) = match self.kind {
            ScenarioKind::Quiet => (TrackLabel::Combined, TrackLabel::Combined),
            ScenarioKind::VibrationOnly => (TrackLabel::Vibration, TrackLabel::Vibration),
            ScenarioKind::ShotRamp => (TrackLabel::Combined, TrackLabel::Combined),
        };
        Ok(ScenarioTracks {
            track1: PhaseTrack::new(track(params.lambda1), label1)?,
            track2: PhaseTrack::new(track(params.lambda2), label2)?,
            density,
        })
    }
}

/// Shorthand for `Scenario::new(kind).tracks(..)` from a scenario tag.
pub fn make_scenario_tracks(
    kind: &str,
    n: usize,
    params: &InterferometerParams,
) -> Result<ScenarioTracks> {
    Scenario::new(kind.parse()?).tracks(params, n)
}

/// `S = A * Y`, sample by sample.
pub fn apply_crosstalk(
    clean: &MultichannelSignal,
    model: &MixingModel,
) -> Result<MultichannelSignal> {
    if model.dim() != clean.channels() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} mixing matrix applied to {} channels",
            model.dim(),
            model.dim(),
            clean.channels()
        )));
    }
    MultichannelSignal::new(model.matrix().dot(clean.data()), clean.sample_rate())
}

/// Adds white gaussian noise to each channel so that its mean-square power
/// over the noise variance equals `snr_db`. `f64::INFINITY` adds nothing.
pub fn add_awgn(signal: &MultichannelSignal, snr_db: f64, seed: u64) -> Result<MultichannelSignal> {
    if snr_db == f64::INFINITY {
        return Ok(signal.clone());
    }
    if !snr_db.is_finite() {
        return Err(Error::InvalidParameter(format!("bad SNR {snr_db} dB")));
    }
    let mut rng = SeededRng::new(seed);
    let mut data = signal.data().clone();
    for (i, mut row) in data.rows_mut().into_iter().enumerate() {
        let power = mean_square(row.as_slice().unwrap());
        if power <= 0.0 {
            return Err(Error::ZeroPower(i));
        }
        let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
        row.mapv_inplace(|v| v + sigma * rng.gaussian());
    }
    MultichannelSignal::new(data, signal.sample_rate())
}

/// Mid-tread uniform quantizer with `2^bits` levels spaced
/// `full_scale / 2^(bits-1)` apart, saturating at the end codes.
pub fn quantize_adc(
    signal: &MultichannelSignal,
    bits: u32,
    full_scale: f64,
) -> Result<MultichannelSignal> {
    if !(2..=24).contains(&bits) {
        return Err(Error::InvalidParameter(format!(
            "ADC resolution must be 2..=24 bits, got {bits}"
        )));
    }
    if !(full_scale.is_finite() && full_scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "full scale must be positive, got {full_scale}"
        )));
    }
    let half = (1i64 << (bits - 1)) as f64;
    let step = full_scale / half;
    let data = signal
        .data()
        .mapv(|v| (v / step).round().clamp(-half, half - 1.0) * step);
    MultichannelSignal::new(data, signal.sample_rate())
}
