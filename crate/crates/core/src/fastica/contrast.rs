//! Non-quadratic contrast functions for the negentropy approximation
//! `J(y) ≈ [E G(y) - E G(ν)]²`, with `ν` standard normal.
//!
//! * log-cosh: `G(u) = log cosh(a u) / a`, `g(u) = tanh(a u)`,
//!   `g'(u) = a (1 - tanh²(a u))`, with `1 <= a <= 2`;
//! * gauss: `G(u) = -exp(-u²/2)`, `g(u) = u exp(-u²/2)`,
//!   `g'(u) = (1 - u²) exp(-u²/2)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::str::FromStr;
use std::sync::OnceLock;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Contrast {
    LogCosh,
    Gauss,
}

impl FromStr for Contrast {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logcosh" => Ok(Self::LogCosh),
            "gauss" => Ok(Self::Gauss),
            other => Err(Error::InvalidParameter(format!(
                "unknown contrast `{other}` (expected logcosh or gauss)"
            ))),
        }
    }
}

impl std::fmt::Display for Contrast {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::LogCosh => "logcosh",
            Self::Gauss => "gauss",
        })
    }
}

pub(crate) fn check_steepness(contrast: Contrast, a: f64) -> Result<()> {
    if contrast == Contrast::LogCosh && !(1.0..=2.0).contains(&a) {
        return Err(Error::InvalidParameter(format!(
            "log-cosh steepness must lie in [1, 2], got {a}"
        )));
    }
    Ok(())
}

/// `log cosh(x)` without overflow for large `|x|`.
fn log_cosh(x: f64) -> f64 {
    let ax = x.abs();
    ax + (-2.0 * ax).exp().ln_1p() - std::f64::consts::LN_2
}

/// The contrast `G(u)` itself.
pub fn contrast_value(u: f64, contrast: Contrast, a: f64) -> f64 {
    match contrast {
        Contrast::LogCosh => log_cosh(a * u) / a,
        Contrast::Gauss => -(-0.5 * u * u).exp(),
    }
}

/// `(g(u), g'(u))` for one sample.
#[inline]
pub fn derivatives(u: f64, contrast: Contrast, a: f64) -> (f64, f64) {
    match contrast {
        Contrast::LogCosh => {
            let t = (a * u).tanh();
            (t, a * (1.0 - t * t))
        }
        Contrast::Gauss => {
            let e = (-0.5 * u * u).exp();
            (u * e, (1.0 - u * u) * e)
        }
    }
}

/// Element-wise `g` and `g'` over a sample vector.
pub fn contrast_eval(u: &[f64], contrast: Contrast, a: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_steepness(contrast, a)?;
    Ok(u.iter().map(|&x| derivatives(x, contrast, a)).unzip())
}

/// Nodes and weights of `n`-point Gauss-Hermite quadrature for
/// `∫ e^{-x²} f(x) dx`, by Newton iteration on the normalized Hermite
/// recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => {
                let m = (2 * n + 1) as f64;
                m.sqrt() - 1.85575 * m.powf(-1.0 / 6.0)
            }
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

const HERMITE_NODES: usize = 150;

fn hermite_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_hermite(HERMITE_NODES))
}

/// `E G(ν)` for a standard normal `ν`.
///
/// Closed form `-1/√2` for the gauss contrast; 150-node Gauss-Hermite
/// quadrature for log-cosh (log cosh is only analytic in a strip, so the
/// rule needs many nodes to reach double precision).
pub fn gaussian_expectation(contrast: Contrast, a: f64) -> f64 {
    match contrast {
        Contrast::Gauss => -FRAC_1_SQRT_2,
        Contrast::LogCosh => {
            let (x, w) = hermite_rule();
            x.iter()
                .zip(w)
                .map(|(xi, wi)| wi * contrast_value(std::f64::consts::SQRT_2 * xi, contrast, a))
                .sum::<f64>()
                / PI.sqrt()
        }
    }
}

/// One-term negentropy approximation `[E G(y) - E G(ν)]²` of a standardized
/// sample vector.
pub fn negentropy_estimate(y: &[f64], contrast: Contrast, a: f64) -> Result<f64> {
    check_steepness(contrast, a)?;
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let variance = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if mean.abs() > 1e-3 || (variance - 1.0).abs() > 1e-3 {
        return Err(Error::NotStandardized { mean, variance });
    }
    let eg = y.iter().map(|&v| contrast_value(v, contrast, a)).sum::<f64>() / n;
    Ok((eg - gaussian_expectation(contrast, a)).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_at_origin() {
        for a in [1.0, 1.5, 2.0] {
            assert_eq!(derivatives(0.0, Contrast::LogCosh, a), (0.0, a));
        }
        assert_eq!(derivatives(0.0, Contrast::Gauss, 1.0), (0.0, 1.0));
        let (g, gp) = derivatives(40.0, Contrast::Gauss, 1.0);
        assert!(g.abs() < 1e-300 && gp.abs() < 1e-300);
    }

    #[test]
    fn steepness_range_enforced() {
        assert!(contrast_eval(&[0.0], Contrast::LogCosh, 0.5).is_err());
        assert!(contrast_eval(&[0.0], Contrast::LogCosh, 2.5).is_err());
        assert!(contrast_eval(&[0.0], Contrast::Gauss, 0.5).is_ok());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-5;
        for contrast in [Contrast::LogCosh, Contrast::Gauss] {
            for u in [-2.0, -1.0, 0.5, 3.0] {
                let a = 1.5;
                let (g, gp) = derivatives(u, contrast, a);
                let fd_g = (contrast_value(u + h, contrast, a) - contrast_value(u - h, contrast, a))
                    / (2.0 * h);
                let fd_gp = (derivatives(u + h, contrast, a).0 - derivatives(u - h, contrast, a).0)
                    / (2.0 * h);
                assert!((g - fd_g).abs() < 1e-6, "{contrast} g at {u}");
                assert!((gp - fd_gp).abs() < 1e-6, "{contrast} g' at {u}");
            }
        }
    }

    #[test]
    fn hermite_rule_integrates_polynomials() {
        let (x, w) = gauss_hermite(32);
        let sqrt_pi = PI.sqrt();
        assert!((w.iter().sum::<f64>() - sqrt_pi).abs() < 1e-13);
        // ∫ x² e^{-x²} = √π / 2, ∫ x⁴ e^{-x²} = 3√π / 4.
        let m2: f64 = x.iter().zip(&w).map(|(a, b)| b * a * a).sum();
        let m4: f64 = x.iter().zip(&w).map(|(a, b)| b * a.powi(4)).sum();
        assert!((m2 - sqrt_pi / 2.0).abs() < 1e-13);
        assert!((m4 - 3.0 * sqrt_pi / 4.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_expectation_against_fine_quadrature() {
        // Composite Simpson rule on [-12, 12] against the normal density.
        let a = 1.3;
        let n = 20_000;
        let (lo, hi) = (-12.0f64, 12.0f64);
        let h = (hi - lo) / n as f64;
        let f = |x: f64| contrast_value(x, Contrast::LogCosh, a) * (-0.5 * x * x).exp();
        let mut s = f(lo) + f(hi);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(lo + i as f64 * h);
        }
        let simpson = s * h / 3.0 / (2.0 * PI).sqrt();
        assert!((gaussian_expectation(Contrast::LogCosh, a) - simpson).abs() < 1e-9);
    }

    #[test]
    fn negentropy_is_even_and_rejects_raw_input() {
        let y: Vec<f64> = (0..1000)
            .map(|k| 2f64.sqrt() * (std::f64::consts::TAU * k as f64 / 100.0).sin())
            .collect();
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        for c in [Contrast::LogCosh, Contrast::Gauss] {
            assert_eq!(
                negentropy_estimate(&y, c, 1.0).unwrap(),
                negentropy_estimate(&neg, c, 1.0).unwrap()
            );
        }
        let raw: Vec<f64> = y.iter().map(|v| v * 3.0).collect();
        assert!(matches!(
            negentropy_estimate(&raw, Contrast::Gauss, 1.0),
            Err(Error::NotStandardized { .. })
        ));
    }
}
