//! Windowed-sinc FIR design and direct-form filtering.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::MultichannelSignal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// `0.54 - 0.46 cos(2 pi n / p)`
    Hamming,
    /// `0.42 - 0.5 cos(2 pi n / p) + 0.08 cos(4 pi n / p)`
    Blackman,
}

impl Window {
    fn at(self, n: usize, order: usize) -> f64 {
        let x = TAU * n as f64 / order as f64;
        match self {
            Self::Hamming => 0.54 - 0.46 * x.cos(),
            Self::Blackman => 0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Band {
    LowPass { cutoff: f64 },
    BandPass { lo: f64, hi: f64 },
}

/// Linear-phase FIR filter of order `p` (`p + 1` symmetric taps).
#[derive(Debug, Clone, PartialEq)]
pub struct FirFilter {
    pub taps: Vec<f64>,
    pub order: usize,
    pub band: Band,
    pub design_rate: f64,
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Ideal response sampled at `m = n - p/2`, windowed, then mirrored so the
/// taps are exactly symmetric.
fn windowed(order: usize, window: Window, ideal: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut taps = vec![0.0; order + 1];
    for n in 0..=order / 2 {
        let m = n as f64 - order as f64 / 2.0;
        taps[n] = ideal(m) * window.at(n, order);
        taps[order - n] = taps[n];
    }
    taps
}

impl FirFilter {
    /// Complex response `H(f) = Σ taps[n] e^{-j 2 pi f n / fs}`.
    pub fn response(&self, freq: f64) -> Complex64 {
        self.taps
            .iter()
            .enumerate()
            .map(|(n, &h)| Complex64::from_polar(h, -TAU * freq * n as f64 / self.design_rate))
            .sum()
    }

    pub fn magnitude(&self, freq: f64) -> f64 {
        self.response(freq).norm()
    }

    /// Delay in samples of the linear-phase response, `p / 2`.
    pub fn group_delay(&self) -> f64 {
        self.order as f64 / 2.0
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    fn scale_to_unit_gain_at(mut self, freq: f64) -> Self {
        let g = self.magnitude(freq);
        self.taps.iter_mut().for_each(|t| *t /= g);
        self
    }
}

fn check_band(lo: f64, hi: f64, sample_rate: f64) -> Result<()> {
    let nyquist = sample_rate / 2.0;
    if hi >= nyquist || hi.is_nan() {
        return Err(Error::Nyquist { freq: hi, nyquist });
    }
    if !(lo > 0.0 && lo < hi) {
        return Err(Error::InvalidParameter(format!(
            "band edges must satisfy 0 < lo < hi, got {lo}..{hi}"
        )));
    }
    Ok(())
}

/// Hamming-windowed sinc bandpass, normalized to unit gain at the band centre.
pub fn design_fir_bandpass(order: usize, f_lo: f64, f_hi: f64, sample_rate: f64) -> Result<FirFilter> {
    design_bandpass_with(order, f_lo, f_hi, sample_rate, Window::Hamming)
}

pub fn design_bandpass_with(
    order: usize,
    f_lo: f64,
    f_hi: f64,
    sample_rate: f64,
    window: Window,
) -> Result<FirFilter> {
    if order < 2 {
        return Err(Error::InvalidParameter(format!(
            "filter order must be at least 2, got {order}"
        )));
    }
    check_band(f_lo, f_hi, sample_rate)?;
    let (lo, hi) = (f_lo / sample_rate, f_hi / sample_rate);
    let taps = windowed(order, window, |m| 2.0 * hi * sinc(2.0 * hi * m) - 2.0 * lo * sinc(2.0 * lo * m));
    Ok(FirFilter {
        taps,
        order,
        band: Band::BandPass { lo: f_lo, hi: f_hi },
        design_rate: sample_rate,
    }
    .scale_to_unit_gain_at(0.5 * (f_lo + f_hi)))
}

/// Windowed-sinc lowpass with unit DC gain.
pub fn design_fir_lowpass(order: usize, cutoff: f64, sample_rate: f64, window: Window) -> Result<FirFilter> {
    if order < 2 {
        return Err(Error::InvalidParameter(format!(
            "filter order must be at least 2, got {order}"
        )));
    }
    let nyquist = sample_rate / 2.0;
    if !(cutoff > 0.0 && cutoff < nyquist) {
        return Err(Error::Nyquist { freq: cutoff, nyquist });
    }
    let fc = cutoff / sample_rate;
    let taps = windowed(order, window, |m| 2.0 * fc * sinc(2.0 * fc * m));
    Ok(FirFilter {
        taps,
        order,
        band: Band::LowPass { cutoff },
        design_rate: sample_rate,
    }
    .scale_to_unit_gain_at(0.0))
}

/// Causal direct-form convolution `y[n] = Σ_k taps[k] x[n-k]`, zero before
/// the first sample, same length as the input.
pub fn convolve(x: &[f64], taps: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|n| {
            taps.iter()
                .take(n + 1)
                .enumerate()
                .map(|(k, h)| h * x[n - k])
                .sum()
        })
        .collect()
}

/// Filters every channel. Returns the output and the filter's group delay in
/// samples.
pub fn filter(signal: &MultichannelSignal, fir: &FirFilter) -> Result<(MultichannelSignal, f64)> {
    if (signal.sample_rate() - fir.design_rate).abs() > 1e-9 * fir.design_rate {
        return Err(Error::InvalidParameter(format!(
            "signal rate {} Hz differs from filter design rate {} Hz",
            signal.sample_rate(),
            fir.design_rate
        )));
    }
    let rows: Vec<Vec<f64>> = (0..signal.channels())
        .map(|c| convolve(signal.channel(c).as_slice().unwrap(), &fir.taps))
        .collect();
    Ok((
        MultichannelSignal::from_channels(&rows, signal.sample_rate())?,
        fir.group_delay(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taps_are_symmetric() {
        for order in [2, 5, 6, 31, 64] {
            let f = design_fir_bandpass(order, 20e6, 30e6, 200e6).unwrap();
            for k in 0..=order {
                assert_eq!(f.taps[k], f.taps[order - k]);
            }
            assert_eq!(f.len(), order + 1);
        }
    }

    #[test]
    fn bandpass_rejects_dc_and_has_unit_centre_gain() {
        let f = design_fir_bandpass(40, 20e6, 30e6, 200e6).unwrap();
        let dc: f64 = f.taps.iter().sum();
        assert!(dc.abs() < f.magnitude(25e6));
        assert!((f.magnitude(25e6) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fifth_order_response_by_direct_sum() {
        // Band centred on 40 MHz: 32..48 MHz at 200 MSPS.
        let f = design_fir_bandpass(5, 32e6, 48e6, 200e6).unwrap();
        let direct = |freq: f64| -> f64 {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, h) in f.taps.iter().enumerate() {
                let arg = TAU * freq * n as f64 / 200e6;
                re += h * arg.cos();
                im -= h * arg.sin();
            }
            re.hypot(im)
        };
        assert!((direct(40e6) - 1.0).abs() < 1e-12);
        assert!(direct(25e6) < direct(40e6));
        assert!((direct(25e6) - f.magnitude(25e6)).abs() < 1e-12);
    }

    #[test]
    fn band_validation() {
        assert!(matches!(
            design_fir_bandpass(5, 20e6, 120e6, 200e6),
            Err(Error::Nyquist { .. })
        ));
        assert!(design_fir_bandpass(5, 30e6, 20e6, 200e6).is_err());
        assert!(design_fir_bandpass(1, 20e6, 30e6, 200e6).is_err());
        assert!(design_fir_lowpass(10, 0.0, 1.0, Window::Hamming).is_err());
    }

    #[test]
    fn impulse_response_is_taps() {
        let f = design_fir_bandpass(5, 20e6, 30e6, 200e6).unwrap();
        let mut x = vec![0.0; 10];
        x[0] = 1.0;
        let s = MultichannelSignal::single(x, 200e6).unwrap();
        let (y, delay) = filter(&s, &f).unwrap();
        assert_eq!(&y.channel_vec(0)[..6], &f.taps[..]);
        assert!(y.channel_vec(0)[6..].iter().all(|&v| v == 0.0));
        assert_eq!(delay, 2.5);
    }

    #[test]
    fn in_band_tone_scaled_by_response() {
        let fs = 200e6;
        let f = design_fir_bandpass(12, 20e6, 30e6, fs).unwrap();
        let tone = 27e6;
        let x: Vec<f64> = (0..2000).map(|k| (TAU * tone * k as f64 / fs).sin()).collect();
        let (y, _) = filter(&MultichannelSignal::single(x, fs).unwrap(), &f).unwrap();
        let steady = &y.channel_vec(0)[100..];
        let peak = steady.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - f.magnitude(tone)).abs() < 1e-3);
    }

    #[test]
    fn filtering_is_linear_and_rate_checked() {
        let f = design_fir_bandpass(5, 20e6, 30e6, 200e6).unwrap();
        let a: Vec<f64> = (0..64).map(|k| (k as f64 * 0.3).sin()).collect();
        let b: Vec<f64> = (0..64).map(|k| (k as f64 * 1.1).cos()).collect();
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let ya = convolve(&a, &f.taps);
        let yb = convolve(&b, &f.taps);
        for (k, y) in convolve(&sum, &f.taps).iter().enumerate() {
            assert!((y - ya[k] - yb[k]).abs() < 1e-14);
        }
        let wrong = MultichannelSignal::single(a, 100e6).unwrap();
        assert!(filter(&wrong, &f).is_err());
    }

    #[test]
    fn lowpass_has_unit_dc_gain() {
        let f = design_fir_lowpass(128, 200e3, 8e6, Window::Blackman).unwrap();
        assert!((f.taps.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(f.magnitude(2e6) < 1e-4);
    }
}
