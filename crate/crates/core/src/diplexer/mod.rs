//! Single-detector frequency diplexing: a pair of low-order bandpass FIRs
//! gives two differently weighted mixtures of the two carriers, and fastICA
//! turns those into cleanly split, equal-amplitude outputs.

mod fir;

use std::f64::consts::TAU;

pub use fir::{
    convolve, design_bandpass_with, design_fir_bandpass, design_fir_lowpass, filter, Band,
    FirFilter, Window,
};

use crate::error::{Error, Result};
use crate::fastica::{self, FastIcaConfig, Separation};
use crate::io::KeyValues;
use crate::metrics::{self, Db};
use crate::signal::{mean, MultichannelSignal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiplexParams {
    pub f_a: f64,
    pub f_b: f64,
    /// FIR order `p`; each filter has `p + 1` taps.
    pub order: usize,
    /// Half-width of each passband as a fraction of its centre frequency.
    pub band_fraction: f64,
}

impl Default for DiplexParams {
    fn default() -> Self {
        Self {
            f_a: 25e6,
            f_b: 40e6,
            order: 5,
            band_fraction: 0.2,
        }
    }
}

impl DiplexParams {
    pub fn filters(&self, sample_rate: f64) -> Result<[FirFilter; 2]> {
        let design = |f: f64| {
            design_fir_bandpass(
                self.order,
                f * (1.0 - self.band_fraction),
                f * (1.0 + self.band_fraction),
                sample_rate,
            )
        };
        Ok([design(self.f_a)?, design(self.f_b)?])
    }
}

#[derive(Debug, Clone)]
pub struct Diplexed {
    /// Channel 0 carries `f_a`, channel 1 carries `f_b`; zero mean, unit peak.
    pub output: MultichannelSignal,
    /// The bandpass outputs alone, over the same samples as `output`.
    pub fir_only: MultichannelSignal,
    pub filters: [FirFilter; 2],
    pub separation: Separation,
    /// Leading filter-transient samples dropped before separation.
    pub trimmed: usize,
}

/// Splits a single-channel two-tone composite into its two carriers.
///
/// The first `order` filter outputs are start-up transient and are dropped,
/// so the outputs are `order` samples shorter than the input. Separated
/// components (unit variance) are rescaled to unit peak amplitude.
pub fn diplex(
    composite: &MultichannelSignal,
    params: &DiplexParams,
    cfg: &FastIcaConfig,
) -> Result<Diplexed> {
    if composite.channels() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "diplexer takes one channel, got {}",
            composite.channels()
        )));
    }
    if params.f_a == params.f_b {
        return Err(Error::InvalidParameter(
            "diplexed carriers must differ".into(),
        ));
    }
    if !(params.band_fraction > 0.0 && params.band_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "band fraction must be in (0, 1), got {}",
            params.band_fraction
        )));
    }
    let fs = composite.sample_rate();
    let filters = params.filters(fs)?;
    let trimmed = params.order;
    if composite.len() < trimmed + 2 {
        return Err(Error::InvalidParameter("composite shorter than the filters".into()));
    }
    let (ya, _) = filter(composite, &filters[0])?;
    let (yb, _) = filter(composite, &filters[1])?;
    let fir_only =
        MultichannelSignal::stack(&[&ya, &yb])?.slice_samples(trimmed, composite.len())?;

    let separation = fastica::separate(&fir_only, cfg, Some(&[params.f_a, params.f_b]))?;
    if !separation.result.all_converged() {
        return Err(Error::NotConverged {
            units: (0..2).filter(|&i| !separation.result.converged[i]).collect(),
            max_iter: cfg.max_iter,
        });
    }
    let mut out = separation.components.data().clone();
    for mut row in out.rows_mut() {
        let peak = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        row.mapv_inplace(|v| v / peak);
    }
    Ok(Diplexed {
        output: MultichannelSignal::new(out, fs)?,
        fir_only,
        filters,
        separation,
        trimmed,
    })
}

/// Residual, mean and amplitude measurements of a diplexer run.
#[derive(Debug, Clone, PartialEq)]
pub struct DiplexReport {
    /// Other-carrier power relative to wanted-carrier power, per channel,
    /// after the FIRs alone.
    pub fir_only_residual_db: [Db; 2],
    /// The same after FIR + ICA.
    pub residual_db: [Db; 2],
    pub mean: [f64; 2],
    pub peak: [f64; 2],
}

impl DiplexReport {
    pub fn measure(d: &Diplexed, params: &DiplexParams) -> Result<Self> {
        let fs = d.output.sample_rate();
        let pairs = [(params.f_a, params.f_b), (params.f_b, params.f_a)];
        let residual = |s: &MultichannelSignal| -> Result<[Db; 2]> {
            let r0 = metrics::tone_residual_db(s.channel(0).as_slice().unwrap(), fs, pairs[0].0, pairs[0].1)?;
            let r1 = metrics::tone_residual_db(s.channel(1).as_slice().unwrap(), fs, pairs[1].0, pairs[1].1)?;
            Ok([r0, r1])
        };
        let stats = |i: usize| {
            let x = d.output.channel_vec(i);
            (mean(&x), x.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        };
        let (m0, p0) = stats(0);
        let (m1, p1) = stats(1);
        Ok(Self {
            fir_only_residual_db: residual(&d.fir_only)?,
            residual_db: residual(&d.output)?,
            mean: [m0, m1],
            peak: [p0, p1],
        })
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        for i in 0..2 {
            kv.push(&format!("diplex.ch{i}.fir_only_residual_db"), self.fir_only_residual_db[i]);
            kv.push(&format!("diplex.ch{i}.residual_db"), self.residual_db[i]);
            kv.push_f64(&format!("diplex.ch{i}.mean"), self.mean[i]);
            kv.push_f64(&format!("diplex.ch{i}.peak"), self.peak[i]);
        }
        kv
    }
}

/// `amp_a sin(2 pi f_a t) + amp_b sin(2 pi f_b t)`.
pub fn composite_tones(
    f_a: f64,
    f_b: f64,
    amp_a: f64,
    amp_b: f64,
    sample_rate: f64,
    n: usize,
) -> Result<MultichannelSignal> {
    let x = (0..n)
        .map(|k| {
            let t = k as f64 / sample_rate;
            amp_a * (TAU * f_a * t).sin() + amp_b * (TAU * f_b * t).sin()
        })
        .collect();
    MultichannelSignal::single(x, sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = 200e6;
    const N: usize = 40_000;

    fn run(amp_a: f64, amp_b: f64) -> (Diplexed, DiplexReport) {
        let p = DiplexParams::default();
        let x = composite_tones(p.f_a, p.f_b, amp_a, amp_b, FS, N).unwrap();
        let d = diplex(&x, &p, &FastIcaConfig::default()).unwrap();
        let r = DiplexReport::measure(&d, &p).unwrap();
        (d, r)
    }

    /// Independent residual oracle: exact DFT bins (both tones complete whole
    /// cycles over the record, so no leakage).
    fn dft_residual_db(x: &[f64], wanted: f64, other: f64) -> f64 {
        let n = x.len() as f64;
        let bin = |f: f64| -> f64 {
            let (mut re, mut im) = (0.0, 0.0);
            for (k, v) in x.iter().enumerate() {
                let arg = TAU * f * k as f64 / FS;
                re += v * arg.cos();
                im += v * arg.sin();
            }
            (re * re + im * im) / (n * n)
        };
        10.0 * (bin(other) / bin(wanted)).log10()
    }

    #[test]
    fn splits_equal_tones() {
        let (d, r) = run(1.0, 1.0);
        // Trim so the analysis window holds whole cycles of both tones.
        for (i, (w, o)) in [(25e6, 40e6), (40e6, 25e6)].into_iter().enumerate() {
            let x = d.output.channel_vec(i);
            let whole = &x[x.len() - 39_960..];
            assert!(dft_residual_db(whole, w, o) <= -40.0);
            assert!(r.residual_db[i].value() <= -40.0);
            assert!(r.mean[i].abs() < 1e-6);
            assert!((r.peak[i] - 1.0).abs() < 1e-3);
            assert!(r.fir_only_residual_db[i].value() > -20.0);
        }
    }

    #[test]
    fn equalizes_unbalanced_tones() {
        let (_, r) = run(1.0, 0.1);
        for i in 0..2 {
            assert!(r.residual_db[i].value() <= -40.0, "{:?}", r);
            assert!((r.peak[i] - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn single_tone_is_rank_deficient() {
        let p = DiplexParams::default();
        let x = composite_tones(p.f_a, p.f_b, 0.0, 1.0, FS, N).unwrap();
        assert!(matches!(
            diplex(&x, &p, &FastIcaConfig::default()),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let (d1, _) = run(1.0, 1.0);
        let (d2, _) = run(1.0, 1.0);
        assert_eq!(d1.output, d2.output);
    }

    #[test]
    fn rejects_bad_input() {
        let p = DiplexParams::default();
        let two = MultichannelSignal::from_channels(&[vec![0.0; 10], vec![0.0; 10]], FS).unwrap();
        assert!(diplex(&two, &p, &FastIcaConfig::default()).is_err());
        let same = DiplexParams { f_b: p.f_a, ..p };
        let x = composite_tones(25e6, 40e6, 1.0, 1.0, FS, 1000).unwrap();
        assert!(diplex(&x, &same, &FastIcaConfig::default()).is_err());
    }
}
