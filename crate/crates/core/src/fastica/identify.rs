//! Resolving ICA's permutation and sign ambiguity.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::signal::MultichannelSignal;
use crate::spectrum;

/// Number of leading samples used to fix each component's sign.
pub const SIGN_WINDOW: usize = 1024;

/// Maps output labels to estimated components: label `i` is component
/// `order[i]` multiplied by `signs[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub order: Vec<usize>,
    pub signs: Vec<f64>,
}

impl Assignment {
    pub fn identity(c: usize) -> Self {
        Self {
            order: (0..c).collect(),
            signs: vec![1.0; c],
        }
    }

    pub fn new(order: Vec<usize>, signs: Vec<f64>) -> Result<Self> {
        let c = order.len();
        let mut seen = vec![false; c];
        for &o in &order {
            if o >= c || std::mem::replace(&mut seen[o], true) {
                return Err(Error::InvalidParameter(format!(
                    "assignment {order:?} is not a permutation"
                )));
            }
        }
        if signs.len() != c || signs.iter().any(|s| s.abs() != 1.0) {
            return Err(Error::InvalidParameter(format!(
                "assignment signs {signs:?} must be ±1"
            )));
        }
        Ok(Self { order, signs })
    }

    pub fn is_identity(&self) -> bool {
        self.order.iter().enumerate().all(|(i, &o)| i == o) && self.signs.iter().all(|&s| s == 1.0)
    }
}

/// Matches each expected carrier to the component whose spectral peak is
/// nearest to it.
///
/// Signs follow the sine-carrier convention of [`crate::demod`]: a component
/// is negated when its carrier phase over the first [`SIGN_WINDOW`] samples
/// falls outside `(-π/2, π/2]`, so that records whose phase starts near zero
/// come out with their true polarity.
pub fn identify_components(y: &MultichannelSignal, expected_freqs: &[f64]) -> Result<Assignment> {
    let c = y.channels();
    if expected_freqs.len() != c {
        return Err(Error::DimensionMismatch(format!(
            "{} expected frequencies for {c} components",
            expected_freqs.len()
        )));
    }
    let nyquist = y.sample_rate() / 2.0;
    for (i, &f) in expected_freqs.iter().enumerate() {
        if !(f > 0.0 && f < nyquist) {
            return Err(Error::Nyquist { freq: f, nyquist });
        }
        if expected_freqs[..i].contains(&f) {
            return Err(Error::InvalidParameter(format!(
                "expected frequency {f} Hz listed twice"
            )));
        }
    }
    let peaks: Vec<f64> = (0..c)
        .map(|i| spectrum::peak_frequency(y.channel(i).as_slice().unwrap(), y.sample_rate()))
        .collect();
    let mut order = Vec::with_capacity(c);
    for (label, &f) in expected_freqs.iter().enumerate() {
        let comp = (0..c)
            .min_by(|&a, &b| (peaks[a] - f).abs().total_cmp(&(peaks[b] - f).abs()))
            .expect("at least one component");
        if let Some(first) = order.iter().position(|&o| o == comp) {
            return Err(Error::IdentificationCollision {
                first,
                second: label,
                component: comp,
            });
        }
        order.push(comp);
    }
    let signs = order
        .iter()
        .zip(expected_freqs)
        .map(|(&comp, &f)| {
            let x = y.channel(comp);
            let z = spectrum::project(x.as_slice().unwrap(), y.sample_rate(), f, SIGN_WINDOW);
            let mut phase = z.arg() + FRAC_PI_2;
            if phase > PI {
                phase -= 2.0 * PI;
            }
            if phase.abs() > FRAC_PI_2 {
                -1.0
            } else {
                1.0
            }
        })
        .collect();
    Assignment::new(order, signs)
}
