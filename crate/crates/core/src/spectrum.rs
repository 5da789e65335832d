//! Spectral measurements on real records.

use std::f64::consts::TAU;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg;

/// Frequency (Hz) of the largest non-DC bin of the magnitude spectrum.
pub fn peak_frequency(x: &[f64], sample_rate: f64) -> f64 {
    let n = x.len();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let peak = buf[1..=n / 2]
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
        .map_or(0, |(i, _)| i + 1);
    peak as f64 * sample_rate / n as f64
}

/// Cosine-reference sample of the local oscillator: `cos(2 pi f k / fs)`
/// and `sin(...)`, with the argument reduced in cycles before scaling so
/// long records keep precision.
pub(crate) fn oscillator(freq: f64, sample_rate: f64, k: usize) -> (f64, f64) {
    let cycles = (freq / sample_rate * k as f64).fract();
    let (s, c) = (TAU * cycles).sin_cos();
    (c, s)
}

/// `Σ x[k] e^{-j 2 pi f k / fs}` over the first `len` samples.
pub fn project(x: &[f64], sample_rate: f64, freq: f64, len: usize) -> Complex64 {
    x.iter()
        .take(len)
        .enumerate()
        .map(|(k, &v)| {
            let (c, s) = oscillator(freq, sample_rate, k);
            Complex64::new(v * c, -v * s)
        })
        .sum()
}

/// Least-squares fit of `x ≈ offset + Σ_i (a_i cos ω_i t + b_i sin ω_i t)`.
/// Returns the peak amplitude `hypot(a_i, b_i)` of each tone.
pub fn tone_amplitudes(x: &[f64], sample_rate: f64, freqs: &[f64]) -> Result<Vec<f64>> {
    let m = 2 * freqs.len() + 1;
    let mut gram = Array2::<f64>::zeros((m, m));
    let mut rhs = Array1::<f64>::zeros(m);
    let mut basis = vec![0.0; m];
    for (k, &v) in x.iter().enumerate() {
        basis[0] = 1.0;
        for (i, &f) in freqs.iter().enumerate() {
            let (c, s) = oscillator(f, sample_rate, k);
            basis[1 + 2 * i] = c;
            basis[2 + 2 * i] = s;
        }
        for r in 0..m {
            rhs[r] += basis[r] * v;
            for c in r..m {
                gram[[r, c]] += basis[r] * basis[c];
            }
        }
    }
    for r in 0..m {
        for c in 0..r {
            gram[[r, c]] = gram[[c, r]];
        }
    }
    let coef = linalg::invert(&gram)
        .map_err(|_| Error::InvalidParameter("tone frequencies are not resolvable".into()))?
        .dot(&rhs);
    Ok((0..freqs.len())
        .map(|i| coef[1 + 2 * i].hypot(coef[2 + 2 * i]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peak_of_bin_centered_tone() {
        let x: Vec<f64> = (0..1000).map(|k| (TAU * 37.0 * k as f64 / 1000.0).sin()).collect();
        assert_eq!(peak_frequency(&x, 1000.0), 37.0);
    }

    #[test]
    fn fitted_amplitudes() {
        let fs = 1000.0;
        let x: Vec<f64> = (0..3000)
            .map(|k| {
                let t = k as f64 / fs;
                0.3 + 2.0 * (TAU * 50.0 * t + 0.4).sin() + 0.01 * (TAU * 123.4 * t).cos()
            })
            .collect();
        let amps = tone_amplitudes(&x, fs, &[50.0, 123.4]).unwrap();
        assert!((amps[0] - 2.0).abs() < 1e-10);
        assert!((amps[1] - 0.01).abs() < 1e-10);
    }

    #[test]
    fn projection_phase() {
        let x: Vec<f64> = (0..800).map(|k| (TAU * k as f64 / 8.0 + 0.3).cos()).collect();
        let z = project(&x, 8.0, 1.0, 800);
        assert!((z.arg() - 0.3).abs() < 1e-12);
        assert!((z.norm() - 400.0).abs() < 1e-9);
    }
}
