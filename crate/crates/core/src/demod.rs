//! IQ phase demodulation and two-color line-integrated density.

use std::f64::consts::{PI, TAU};
use std::ops::Range;

use num_complex::Complex64;

use crate::diplexer::{design_fir_lowpass, Window};
use crate::error::{Error, Result, SampleRange};
use crate::signal::MultichannelSignal;
use crate::signalgen::InterferometerParams;
use crate::spectrum::oscillator;

/// Unwrapped phase of one carrier, sampled after decimation.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSeries {
    pub samples: Vec<f64>,
    /// Post-decimation rate, Hz.
    pub sample_rate: f64,
    pub carrier_freq: f64,
    /// Samples at each end still inside the lowpass transient.
    pub settle: usize,
}

impl PhaseSeries {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Indices outside the filter settling margins.
    pub fn valid_range(&self) -> Range<usize> {
        let n = self.samples.len();
        if 2 * self.settle >= n {
            return 0..0;
        }
        self.settle..n - self.settle
    }
}

/// Line-integrated electron density, m⁻².
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySeries {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub settle: usize,
}

impl DensitySeries {
    pub fn valid_range(&self) -> Range<usize> {
        let n = self.samples.len();
        if 2 * self.settle >= n {
            return 0..0;
        }
        self.settle..n - self.settle
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemodConfig {
    /// Lowpass cutoff on the I/Q rails, Hz.
    pub cutoff: f64,
    pub decimation: usize,
    /// Lowpass order (even).
    pub order: usize,
    pub window: Window,
    /// Envelope floor as a fraction of the median envelope.
    pub envelope_floor: f64,
}

impl Default for DemodConfig {
    fn default() -> Self {
        Self {
            cutoff: 200e3,
            decimation: 4,
            order: 256,
            window: Window::Blackman,
            envelope_floor: 0.02,
        }
    }
}

impl DemodConfig {
    /// Cutoff at twice the carrier spacing: wide enough that a leaking
    /// neighbour carrier shows up in the envelope rather than being filtered
    /// away silently.
    ///
    /// The decimated rate is kept at ten times the cutoff or more, so a
    /// phase swing near a beat null spans several retained samples and the
    /// slew check can see it.
    pub fn for_carriers(params: &InterferometerParams) -> Self {
        let cutoff = 2.0 * (params.f_het2 - params.f_het1).abs();
        Self {
            cutoff,
            decimation: ((params.sample_rate / (10.0 * cutoff)).floor() as usize).max(1),
            ..Self::default()
        }
    }

    pub fn validate(&self, sample_rate: f64, carrier: f64) -> Result<()> {
        let nyquist = sample_rate / 2.0;
        if !(carrier > 0.0 && carrier < nyquist) {
            return Err(Error::Nyquist { freq: carrier, nyquist });
        }
        if !(self.cutoff > 0.0 && self.cutoff < carrier) {
            return Err(Error::InvalidParameter(format!(
                "lowpass cutoff {} Hz must lie in (0, carrier {} Hz)",
                self.cutoff, carrier
            )));
        }
        if self.decimation == 0 || sample_rate / (2.0 * self.decimation as f64) <= self.cutoff {
            return Err(Error::InvalidParameter(format!(
                "decimation {} aliases the {} Hz passband",
                self.decimation, self.cutoff
            )));
        }
        if self.order < 2 || !self.order.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "lowpass order must be even and >= 2, got {}",
                self.order
            )));
        }
        if !(self.envelope_floor > 0.0 && self.envelope_floor < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "envelope floor {} outside (0, 1)",
                self.envelope_floor
            )));
        }
        Ok(())
    }
}

/// Full demodulator output, including the diagnostics that
/// [`demodulate`] turns into an error.
#[derive(Debug, Clone, PartialEq)]
pub struct Demodulated {
    pub phase: PhaseSeries,
    /// Carrier amplitude per decimated sample.
    pub envelope: Vec<f64>,
    /// Input-sample ranges where the phase could not be followed.
    pub lost: Vec<SampleRange>,
}

fn wrap(x: f64) -> f64 {
    let w = x - TAU * (x / TAU).round();
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

/// Removes 2π jumps so consecutive differences lie in `(-π, π]`.
///
/// Only whole turns are added, so a sequence that is already continuous
/// comes back bit-for-bit.
pub fn unwrap(wrapped: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(wrapped.len());
    let Some(&first) = wrapped.first() else {
        return out;
    };
    out.push(first);
    let mut turns = 0.0;
    for pair in wrapped.windows(2) {
        let step = pair[1] - pair[0];
        turns += (wrap(step) - step) / TAU;
        turns = turns.round();
        out.push(pair[1] + TAU * turns);
    }
    out
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// IQ demodulation without failing on lost tracking.
///
/// The record is mixed down by `e^{-jωt}`, both rails pass a zero-phase
/// (delay-compensated) windowed-sinc lowpass evaluated only at the retained
/// samples, and the phase is `arg(z) + π/2` because the carriers are sines.
///
/// Tracking counts as lost where the envelope drops below
/// `envelope_floor × median`, or where the phase moves faster than the
/// passband allows (`2π cutoff / fs_dec` per retained sample) — near a
/// beat null the phase swings by ~π within one sample and the unwrap
/// becomes a guess.
pub fn demodulate_unchecked(
    channel: &[f64],
    sample_rate: f64,
    carrier: f64,
    cfg: &DemodConfig,
) -> Result<Demodulated> {
    cfg.validate(sample_rate, carrier)?;
    if channel.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("demodulator input"));
    }
    let n = channel.len();
    let d = cfg.decimation;
    if n < d {
        return Err(Error::InvalidParameter(format!(
            "record of {n} samples is shorter than decimation {d}"
        )));
    }
    let fir = design_fir_lowpass(cfg.order, cfg.cutoff, sample_rate, cfg.window)?;
    let half = cfg.order / 2;

    let mixed: Vec<Complex64> = channel
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let (c, s) = oscillator(carrier, sample_rate, k);
            Complex64::new(v * c, -v * s)
        })
        .collect();

    let m_len = n.div_ceil(d);
    let mut wrapped = Vec::with_capacity(m_len);
    let mut envelope = Vec::with_capacity(m_len);
    for m in 0..m_len {
        let centre = m * d;
        let lo = (centre + half).saturating_sub(n - 1);
        let hi = (centre + half).min(cfg.order);
        let mut z = Complex64::new(0.0, 0.0);
        for j in lo..=hi {
            z += fir.taps[j] * mixed[centre + half - j];
        }
        wrapped.push(wrap(z.arg() + PI / 2.0));
        envelope.push(2.0 * z.norm());
    }

    let samples = unwrap(&wrapped);
    let phase = PhaseSeries {
        samples,
        sample_rate: sample_rate / d as f64,
        carrier_freq: carrier,
        settle: cfg.order.min(m_len),
    };

    let valid = phase.valid_range();
    let mut lost = Vec::new();
    if !valid.is_empty() {
        let med = median(&envelope[valid.clone()]);
        if med <= 0.0 {
            return Err(Error::ZeroEnvelope);
        }
        let floor = cfg.envelope_floor * med;
        let slew = TAU * cfg.cutoff / phase.sample_rate;
        let mut run: Option<usize> = None;
        for m in valid.clone() {
            let bad = envelope[m] < floor
                || (m > valid.start && (phase.samples[m] - phase.samples[m - 1]).abs() > slew);
            match (bad, run) {
                (true, None) => run = Some(m),
                (false, Some(s)) => {
                    lost.push(SampleRange { start: s * d, end: (m * d).min(n) });
                    run = None;
                }
                _ => {}
            }
        }
        if let Some(s) = run {
            lost.push(SampleRange { start: s * d, end: (valid.end * d).min(n) });
        }
    }

    Ok(Demodulated { phase, envelope, lost })
}

/// Phase of `carrier` in `channel`; fails with [`Error::TrackingLost`]
/// naming every input-sample range where the phase could not be followed.
pub fn demodulate(channel: &[f64], sample_rate: f64, carrier: f64, cfg: &DemodConfig) -> Result<PhaseSeries> {
    let d = demodulate_unchecked(channel, sample_rate, carrier, cfg)?;
    if d.lost.is_empty() {
        Ok(d.phase)
    } else {
        Err(Error::TrackingLost { ranges: d.lost })
    }
}

/// `(Δφ1 λ1 - Δφ2 λ2) / (r_e (λ1² - λ2²))`, sample by sample.
pub fn line_integrated_density(
    phi1: &PhaseSeries,
    phi2: &PhaseSeries,
    params: &InterferometerParams,
) -> Result<DensitySeries> {
    if phi1.len() != phi2.len() {
        return Err(Error::DimensionMismatch(format!(
            "phase series lengths {} and {}",
            phi1.len(),
            phi2.len()
        )));
    }
    if (phi1.sample_rate - phi2.sample_rate).abs() > 1e-9 * phi1.sample_rate.abs() {
        return Err(Error::DimensionMismatch(format!(
            "phase series rates {} and {} Hz",
            phi1.sample_rate, phi2.sample_rate
        )));
    }
    let (l1, l2) = (params.lambda1, params.lambda2);
    let den = params.r_e * (l1 * l1 - l2 * l2);
    if l1 == l2 || den == 0.0 || !den.is_finite() {
        return Err(Error::InvalidParameter("the two wavelengths must differ".into()));
    }
    let samples = phi1
        .samples
        .iter()
        .zip(&phi2.samples)
        .map(|(p1, p2)| (p1 * l1 - p2 * l2) / den)
        .collect();
    Ok(DensitySeries {
        samples,
        sample_rate: phi1.sample_rate,
        settle: phi1.settle.max(phi2.settle),
    })
}

/// Both phases, the density and any lost-tracking ranges for a two-channel
/// record whose channel `i` carries carrier `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoColor {
    pub phase1: PhaseSeries,
    pub phase2: PhaseSeries,
    pub density: DensitySeries,
    pub lost: Vec<SampleRange>,
}

pub fn two_color_density(
    signal: &MultichannelSignal,
    params: &InterferometerParams,
    cfg: &DemodConfig,
) -> Result<TwoColor> {
    if signal.channels() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "two-color density needs 2 channels, got {}",
            signal.channels()
        )));
    }
    params.validate()?;
    let [f1, f2] = params.carriers();
    let fs = signal.sample_rate();
    let d1 = demodulate_unchecked(signal.channel(0).as_slice().unwrap(), fs, f1, cfg)?;
    let d2 = demodulate_unchecked(signal.channel(1).as_slice().unwrap(), fs, f2, cfg)?;
    let density = line_integrated_density(&d1.phase, &d2.phase, params)?;
    let mut lost = d1.lost;
    lost.extend(d2.lost);
    lost.sort_by_key(|r| r.start);
    let mut merged: Vec<SampleRange> = Vec::with_capacity(lost.len());
    for r in lost {
        match merged.last_mut() {
            Some(last) if r.start <= last.end => last.end = last.end.max(r.end),
            _ => merged.push(r),
        }
    }
    Ok(TwoColor { phase1: d1.phase, phase2: d2.phase, density, lost: merged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signalgen::{CLASSICAL_ELECTRON_RADIUS, CO2_WAVELENGTH, ND_YAG_WAVELENGTH};
    use proptest::prelude::*;

    const FS: f64 = 8e6;
    const F: f64 = 1e6;

    fn carrier(n: usize, phase: impl Fn(usize) -> f64) -> Vec<f64> {
        (0..n).map(|k| (TAU * F * k as f64 / FS + phase(k)).sin()).collect()
    }

    fn max_err(p: &PhaseSeries, truth: impl Fn(usize) -> f64, d: usize) -> f64 {
        p.valid_range()
            .map(|m| (p.samples[m] - truth(m * d)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn constant_phases() {
        let cfg = DemodConfig::default();
        for offset in [0.0, PI / 3.0, -2.0] {
            let x = carrier(1 << 14, |_| offset);
            let p = demodulate(&x, FS, F, &cfg).unwrap();
            assert_eq!(p.sample_rate, 2e6);
            let e = max_err(&p, |_| offset, 4);
            assert!(e < 1e-6, "offset {offset}: {e}");
        }
    }

    #[test]
    fn recovers_ramp() {
        let n = 1 << 16;
        let track = |k: usize| 8.0 * PI * k as f64 / n as f64;
        let x = carrier(n, track);
        let p = demodulate(&x, FS, F, &DemodConfig::default()).unwrap();
        let r = p.valid_range();
        let ms: f64 = r.clone().map(|m| (p.samples[m] - track(m * 4)).powi(2)).sum::<f64>() / r.len() as f64;
        assert!(ms.sqrt() < 1e-3, "{}", ms.sqrt());
    }

    #[test]
    fn beat_null_loses_tracking() {
        let n = 1 << 15;
        let x: Vec<f64> = (0..n)
            .map(|k| {
                let t = k as f64 / FS;
                (TAU * F * t).sin() + 0.9 * (TAU * 1.1e6 * t).sin()
            })
            .collect();
        match demodulate(&x, FS, F, &DemodConfig::default()) {
            Err(Error::TrackingLost { ranges }) => {
                assert!(!ranges.is_empty());
                // One null per 10 µs beat period.
                assert!(ranges.len() > 100);
                assert!(ranges.iter().all(|r| r.start < r.end && r.end <= n));
            }
            other => panic!("expected lost tracking, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_config() {
        let x = carrier(4096, |_| 0.0);
        let bad = [
            DemodConfig { cutoff: 2e6, ..DemodConfig::default() },
            DemodConfig { decimation: 32, ..DemodConfig::default() },
            DemodConfig { order: 7, ..DemodConfig::default() },
        ];
        for cfg in bad {
            assert!(demodulate(&x, FS, F, &cfg).is_err(), "{cfg:?}");
        }
        assert!(matches!(
            demodulate(&x, FS, 5e6, &DemodConfig::default()),
            Err(Error::Nyquist { .. })
        ));
    }

    #[test]
    fn unwrap_cases() {
        let smooth = vec![0.0, 0.5, 1.0, 0.2, -2.0];
        assert_eq!(unwrap(&smooth), smooth);
        assert!(unwrap(&[]).is_empty());

        let ramp: Vec<f64> = (0..200).map(|k| 0.3 * k as f64).collect();
        let saw: Vec<f64> = ramp.iter().map(|&v| wrap(v)).collect();
        let back = unwrap(&saw);
        for (a, b) in back.iter().zip(&ramp) {
            assert!((a - b).abs() < 1e-12);
        }

        let base: Vec<f64> = (0..50).map(|k| (k as f64 * 0.1).sin()).collect();
        let jumped: Vec<f64> = base
            .iter()
            .enumerate()
            .map(|(k, v)| v + TAU * [0.0, 1.0, -1.0, 2.0][(k / 7) % 4])
            .collect();
        let fixed = unwrap(&jumped);
        for (a, b) in fixed.iter().zip(&base) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn series(samples: Vec<f64>) -> PhaseSeries {
        PhaseSeries { samples, sample_rate: 1e6, carrier_freq: F, settle: 0 }
    }

    #[test]
    fn density_examples() {
        let p = InterferometerParams::default();
        let zero = line_integrated_density(&series(vec![0.0; 4]), &series(vec![0.0; 4]), &p).unwrap();
        assert!(zero.samples.iter().all(|&v| v == 0.0));

        let one = line_integrated_density(&series(vec![1.0]), &series(vec![0.0]), &p).unwrap();
        let oracle = 10.591e-6 / (2.8179403262e-15 * (10.591e-6f64.powi(2) - 1.064e-6f64.powi(2)));
        assert!((one.samples[0] - oracle).abs() <= 1e-12 * oracle);
        assert!((one.samples[0] - 3.39e19).abs() < 0.01e19);
    }

    #[test]
    fn density_rejects_mismatch() {
        let p = InterferometerParams::default();
        assert!(line_integrated_density(&series(vec![0.0; 3]), &series(vec![0.0; 4]), &p).is_err());
        let mut other = series(vec![0.0; 3]);
        other.sample_rate = 2e6;
        assert!(line_integrated_density(&series(vec![0.0; 3]), &other, &p).is_err());
        let same = InterferometerParams { lambda2: p.lambda1, ..p };
        assert!(line_integrated_density(&series(vec![0.0; 3]), &series(vec![0.0; 3]), &same).is_err());
    }

    proptest! {
        #[test]
        fn vibration_cancels(phi2 in proptest::collection::vec(-50.0f64..50.0, 1..64)) {
            let p = InterferometerParams::default();
            let phi1: Vec<f64> = phi2.iter().map(|v| v * ND_YAG_WAVELENGTH / CO2_WAVELENGTH).collect();
            let d = line_integrated_density(&series(phi1.clone()), &series(phi2.clone()), &p).unwrap();
            let scale = CO2_WAVELENGTH
                / (CLASSICAL_ELECTRON_RADIUS * (CO2_WAVELENGTH.powi(2) - ND_YAG_WAVELENGTH.powi(2)));
            for (v, a) in d.samples.iter().zip(&phi1) {
                prop_assert!(v.abs() <= 1e-9 * (scale * a.abs()).max(scale * 1e-300));
            }
        }

        #[test]
        fn density_is_linear(
            a in proptest::collection::vec(-10.0f64..10.0, 8),
            b in proptest::collection::vec(-10.0f64..10.0, 8),
            c in proptest::collection::vec(-10.0f64..10.0, 8),
            e in proptest::collection::vec(-10.0f64..10.0, 8),
            s in -5.0f64..5.0,
        ) {
            let p = InterferometerParams::default();
            let combo = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| u + s * v).collect::<Vec<_>>();
            let lhs = line_integrated_density(&series(combo(&a, &c)), &series(combo(&b, &e)), &p).unwrap();
            let n1 = line_integrated_density(&series(a.clone()), &series(b.clone()), &p).unwrap();
            let n2 = line_integrated_density(&series(c.clone()), &series(e.clone()), &p).unwrap();
            for i in 0..8 {
                let rhs = n1.samples[i] + s * n2.samples[i];
                prop_assert!((lhs.samples[i] - rhs).abs() <= 1e-9 * (n1.samples[i].abs() + (s * n2.samples[i]).abs() + 1e10));
            }
        }
    }
}
