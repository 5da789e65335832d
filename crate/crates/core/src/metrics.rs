//! Separation and recovery quality measures.

use ndarray::Array2;

use crate::demod::{self, DemodConfig};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, KeyValues};
use crate::signal::mean_square;
use crate::spectrum;

/// Below this residual-to-signal power ratio (-240 dB) a residual is taken
/// to be round-off and reported as [`Db::NegInf`].
const ROUND_OFF_FLOOR: f64 = 1e-24;

/// A decibel value with explicit sentinels for zero-power cases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Db {
    Finite(f64),
    /// Numerator power is zero.
    NegInf,
    /// Denominator power is zero.
    PosInf,
}

impl Db {
    fn ratio(num: f64, den: f64) -> Self {
        if den <= 0.0 {
            Self::PosInf
        } else if num <= ROUND_OFF_FLOOR * den {
            Self::NegInf
        } else {
            Self::Finite(10.0 * (num / den).log10())
        }
    }

    /// Numeric value with the sentinels mapped to ±infinity, for comparisons.
    pub fn value(self) -> f64 {
        match self {
            Self::Finite(v) => v,
            Self::NegInf => f64::NEG_INFINITY,
            Self::PosInf => f64::INFINITY,
        }
    }
}

impl std::fmt::Display for Db {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Finite(v) => f.write_str(&fmt_f64(*v)),
            Self::NegInf => f.write_str("NEG_INF"),
            Self::PosInf => f.write_str("POS_INF"),
        }
    }
}

impl std::str::FromStr for Db {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "NEG_INF" => Ok(Self::NegInf),
            "POS_INF" => Ok(Self::PosInf),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Self::Finite)
                .ok_or_else(|| Error::Format(format!("bad dB value `{other}`"))),
        }
    }
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "series lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Interference-to-signal power ratio of an estimate against the true source.
///
/// The estimate is first matched to the truth by the least-squares scale
/// `c = ⟨est, truth⟩ / ⟨truth, truth⟩`, which absorbs ICA's arbitrary
/// amplitude and polarity; what remains is interference.
pub fn isr(estimated: &[f64], truth: &[f64]) -> Result<Db> {
    check_lengths(estimated, truth)?;
    let tt = dot(truth, truth);
    if tt <= 0.0 {
        return Err(Error::ZeroPower(0));
    }
    let c = dot(estimated, truth) / tt;
    let residual: f64 = estimated
        .iter()
        .zip(truth)
        .map(|(e, t)| (e - c * t).powi(2))
        .sum();
    Ok(Db::ratio(residual, c * c * tt))
}

/// `10 log10(P_signal / P_noise)`.
pub fn snr(signal: &[f64], noise: &[f64]) -> Result<Db> {
    check_lengths(signal, noise)?;
    Ok(Db::ratio(mean_square(signal), mean_square(noise)))
}

/// Pearson correlation coefficient.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    sab / (saa * sbb).sqrt()
}

/// `rms(est - truth) / rms(truth)`.
pub fn relative_rms_error(estimated: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(estimated, truth)?;
    let err: f64 = estimated.iter().zip(truth).map(|(e, t)| (e - t).powi(2)).sum();
    let tt = dot(truth, truth);
    if tt <= 0.0 {
        return Err(Error::ZeroPower(0));
    }
    Ok((err / tt).sqrt())
}

/// Beat-envelope modulation depth `(max - min) / (max + min)` of a carrier,
/// measured on the IQ magnitude rail (no decimation) over the settled part
/// of the record.
pub fn envelope_depth(channel: &[f64], sample_rate: f64, carrier: f64) -> Result<f64> {
    let cfg = DemodConfig {
        cutoff: 0.5 * carrier,
        decimation: 1,
        ..DemodConfig::default()
    };
    let d = demod::demodulate_unchecked(channel, sample_rate, carrier, &cfg)?;
    let env = &d.envelope[d.phase.valid_range()];
    if env.is_empty() {
        return Err(Error::InvalidParameter("record too short for envelope".into()));
    }
    let (lo, hi) = env
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi + lo <= 0.0 {
        return Err(Error::ZeroEnvelope);
    }
    Ok(((hi - lo) / (hi + lo)).clamp(0.0, 1.0))
}

/// Power of the `other` carrier relative to the `wanted` carrier, by a joint
/// least-squares tone fit.
pub fn tone_residual_db(x: &[f64], sample_rate: f64, wanted: f64, other: f64) -> Result<Db> {
    let amps = spectrum::tone_amplitudes(x, sample_rate, &[wanted, other])?;
    Ok(Db::ratio(amps[1] * amps[1], amps[0] * amps[0]))
}

/// Overall gain from unit-variance sources to delivered components:
/// `W_ordered * A * diag(source_std)`. A perfect separation is a signed
/// permutation.
pub fn gain_matrix(ordered_unmixing: &Array2<f64>, mixing: &Array2<f64>, source_std: &[f64]) -> Array2<f64> {
    let mut g = ordered_unmixing.dot(mixing);
    for (mut col, s) in g.columns_mut().into_iter().zip(source_std) {
        col.mapv_inplace(|v| v * s);
    }
    g
}

/// True when every row has exactly one entry within `tol` of ±1, all other
/// entries within `tol` of 0, and the large entries sit in distinct columns.
pub fn is_signed_permutation(g: &Array2<f64>, tol: f64) -> bool {
    let mut used = vec![false; g.ncols()];
    for row in g.rows() {
        let mut hit = None;
        for (j, &v) in row.iter().enumerate() {
            if (v.abs() - 1.0).abs() <= tol {
                if hit.is_some() {
                    return false;
                }
                hit = Some(j);
            } else if v.abs() > tol {
                return false;
            }
        }
        match hit {
            Some(j) if !used[j] => used[j] = true,
            _ => return false,
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub isr_db: Vec<Db>,
    pub snr_db: Vec<Db>,
    pub gain_matrix: Option<Array2<f64>>,
    pub envelope_depth: Vec<f64>,
}

impl QualityReport {
    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        let join = |v: &[Db]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
        kv.push("quality.isr_db", join(&self.isr_db));
        kv.push("quality.snr_db", join(&self.snr_db));
        kv.push_vector("quality.envelope_depth", self.envelope_depth.iter().copied());
        if let Some(g) = &self.gain_matrix {
            kv.push("quality.gain_matrix.dim", g.nrows());
            kv.push_matrix("quality.gain_matrix", g);
        }
        kv
    }

    pub fn csv_header(&self) -> String {
        let mut cols = Vec::new();
        for (name, n) in [
            ("isr_db", self.isr_db.len()),
            ("snr_db", self.snr_db.len()),
            ("envelope_depth", self.envelope_depth.len()),
        ] {
            cols.extend((0..n).map(|i| format!("{name}_ch{i}")));
        }
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        self.isr_db
            .iter()
            .chain(&self.snr_db)
            .map(ToString::to_string)
            .chain(self.envelope_depth.iter().map(|v| fmt_f64(*v)))
            .collect::<Vec<_>>()
            .join(",")
    }
}
