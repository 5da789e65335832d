//! Fixed-point fastICA.
//!
//! Each unit iterates
//!
//! ```text
//! w⁺ = E{ B g(wᵀB) } - E{ g'(wᵀB) } w,    w = w⁺ / ‖w⁺‖
//! ```
//!
//! on whitened data `B` until `1 - |⟨w_k, w_{k-1}⟩| <= tol`. Expectations are
//! sample means over the full record. Several units are kept apart either by
//! Gram-Schmidt deflation or by symmetric orthogonalization of the whole
//! weight matrix after every sweep.

mod contrast;
mod identify;

use std::str::FromStr;

use ndarray::{Array1, Array2};

pub use contrast::{
    contrast_eval, contrast_value, derivatives, gauss_hermite, gaussian_expectation,
    negentropy_estimate, Contrast,
};
pub use identify::{identify_components, Assignment, SIGN_WINDOW};

use crate::error::{Error, Result};
use crate::io::KeyValues;
use crate::linalg;
use crate::preprocess::{self, WhiteningTransform};
use crate::rng::SeededRng;
use crate::signal::MultichannelSignal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orthogonalization {
    Deflation,
    Symmetric,
}

impl FromStr for Orthogonalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deflation" => Ok(Self::Deflation),
            "symmetric" => Ok(Self::Symmetric),
            other => Err(Error::InvalidParameter(format!(
                "unknown orthogonalization `{other}` (expected deflation or symmetric)"
            ))),
        }
    }
}

impl std::fmt::Display for Orthogonalization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Deflation => "deflation",
            Self::Symmetric => "symmetric",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastIcaConfig {
    pub contrast: Contrast,
    /// Log-cosh steepness, `1 <= a <= 2`.
    pub a: f64,
    pub max_iter: usize,
    /// Convergence threshold on `1 - |⟨w_k, w_{k-1}⟩|`.
    pub tol: f64,
    pub seed: u64,
    pub ortho: Orthogonalization,
}

impl Default for FastIcaConfig {
    fn default() -> Self {
        Self {
            contrast: Contrast::LogCosh,
            a: 1.0,
            max_iter: 200,
            tol: 1e-8,
            seed: 0,
            ortho: Orthogonalization::Symmetric,
        }
    }
}

impl FastIcaConfig {
    pub fn validate(&self) -> Result<()> {
        contrast::check_steepness(self.contrast, self.a)?;
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Outcome of a single-unit fit.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitFit {
    pub w: Array1<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationResult {
    /// Unmixing matrix acting on whitened data, one unit per row.
    pub w: Array2<f64>,
    /// `w * whitener`, acting on centered raw data.
    pub w_full: Array2<f64>,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
    pub assignment: Assignment,
}

impl SeparationResult {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }

    pub fn channels(&self) -> usize {
        self.w.nrows()
    }

    /// Rows of `w_full` in output order, with signs applied. This is the
    /// matrix that maps centered raw data to the delivered components.
    pub fn ordered_unmixing(&self) -> Array2<f64> {
        let mut m = Array2::<f64>::zeros(self.w_full.raw_dim());
        for (label, (&c, &s)) in self
            .assignment
            .order
            .iter()
            .zip(&self.assignment.signs)
            .enumerate()
        {
            m.row_mut(label).assign(&(&self.w_full.row(c) * s));
        }
        m
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.push("separation.channels", self.channels());
        kv.push_matrix("separation.w", &self.w);
        kv.push_matrix("separation.w_full", &self.w_full);
        kv.push(
            "separation.iterations",
            join(self.iterations.iter().map(ToString::to_string)),
        );
        kv.push(
            "separation.converged",
            join(self.converged.iter().map(ToString::to_string)),
        );
        kv.push(
            "separation.assignment.order",
            join(self.assignment.order.iter().map(ToString::to_string)),
        );
        kv.push(
            "separation.assignment.signs",
            join(self.assignment.signs.iter().map(|s| format!("{s}"))),
        );
        kv
    }

    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let c: usize = kv.parse("separation.channels")?;
        let list = |key: &str| -> Result<Vec<String>> {
            let v: Vec<String> = kv
                .require(key)?
                .split(',')
                .map(|s| s.trim().to_string())
                .collect();
            if v.len() != c {
                return Err(Error::Format(format!("key `{key}`: expected {c} entries")));
            }
            Ok(v)
        };
        let parse_all = |key: &str| -> Result<Vec<usize>> {
            list(key)?
                .iter()
                .map(|s| s.parse().map_err(|_| Error::Format(format!("bad `{s}` in `{key}`"))))
                .collect()
        };
        let converged = list("separation.converged")?
            .iter()
            .map(|s| s.parse().map_err(|_| Error::Format(format!("bad flag `{s}`"))))
            .collect::<Result<Vec<bool>>>()?;
        let signs = kv.vector("separation.assignment.signs", c)?;
        Ok(Self {
            w: kv.matrix("separation.w", c, c)?,
            w_full: kv.matrix("separation.w_full", c, c)?,
            iterations: parse_all("separation.iterations")?,
            converged,
            assignment: Assignment::new(parse_all("separation.assignment.order")?, signs)?,
        })
    }
}

fn join(items: impl Iterator<Item = String>) -> String {
    items.collect::<Vec<_>>().join(",")
}

fn check_whitened(b: &MultichannelSignal, tol: f64) -> Result<()> {
    let cov = b.data().dot(&b.data().t()) / b.len() as f64;
    let dev = linalg::identity_deviation(&cov);
    if dev > tol {
        return Err(Error::InvalidParameter(format!(
            "input is not whitened (covariance deviates from identity by {dev:e})"
        )));
    }
    Ok(())
}

/// One fixed-point update `E{B g(wᵀB)} - E{g'(wᵀB)} w`, unnormalized.
fn update(b: &Array2<f64>, w: &Array1<f64>, cfg: &FastIcaConfig) -> Array1<f64> {
    let n = b.ncols() as f64;
    let y = w.dot(b);
    let mut g = Array1::<f64>::zeros(y.len());
    let mut gp_sum = 0.0;
    for (gi, &yi) in g.iter_mut().zip(y.iter()) {
        let (v, d) = derivatives(yi, cfg.contrast, cfg.a);
        *gi = v;
        gp_sum += d;
    }
    b.dot(&g) / n - w * (gp_sum / n)
}

fn normalize(w: &mut Array1<f64>) {
    let norm = w.dot(w).sqrt();
    w.mapv_inplace(|v| v / norm);
}

/// Runs one unit to convergence from `w0`, projecting out `against` (rows
/// already estimated) after each update when given.
fn run_unit(
    b: &Array2<f64>,
    w0: Array1<f64>,
    against: Option<&Array2<f64>>,
    cfg: &FastIcaConfig,
) -> UnitFit {
    let mut w = w0;
    for it in 1..=cfg.max_iter {
        let mut next = update(b, &w, cfg);
        if let Some(prev) = against {
            gram_schmidt(&mut next, prev);
        }
        normalize(&mut next);
        let residual = 1.0 - next.dot(&w).abs();
        w = next;
        if residual <= cfg.tol {
            return UnitFit {
                w,
                iterations: it,
                converged: true,
            };
        }
    }
    UnitFit {
        w,
        iterations: cfg.max_iter,
        converged: false,
    }
}

fn gram_schmidt(w: &mut Array1<f64>, rows: &Array2<f64>) {
    for r in rows.rows() {
        let p = w.dot(&r);
        w.scaled_add(-p, &r);
    }
}

/// Estimates a single independent direction from whitened data.
///
/// Non-convergence is not an error: the last iterate is returned with
/// `converged == false`.
pub fn fit_one_unit(
    b: &MultichannelSignal,
    w0: &[f64],
    cfg: &FastIcaConfig,
) -> Result<UnitFit> {
    cfg.validate()?;
    if w0.len() != b.channels() {
        return Err(Error::DimensionMismatch(format!(
            "initial vector has {} entries for {} channels",
            w0.len(),
            b.channels()
        )));
    }
    let norm = w0.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!(
            "initial vector must have unit norm, has {norm}"
        )));
    }
    check_whitened(b, 1e-6)?;
    Ok(run_unit(b.data(), Array1::from(w0.to_vec()), None, cfg))
}

/// Symmetric orthogonalization `W ← (W Wᵀ)^{-1/2} W`, computed by iterating
/// `W ← 3/2 W - 1/2 W Wᵀ W` from `W / ‖W‖_F` until `‖W Wᵀ - I‖ < 1e-10`.
pub fn symmetric_orthogonalize(w: &Array2<f64>) -> Array2<f64> {
    let mut w = w / linalg::frobenius(w);
    for _ in 0..10_000 {
        let wwt = w.dot(&w.t());
        if linalg::identity_deviation(&wwt) < 1e-10 {
            break;
        }
        w = &w * 1.5 - wwt.dot(&w) * 0.5;
    }
    w
}

/// Estimates all `C` units of whitened data.
pub fn fit(b: &MultichannelSignal, cfg: &FastIcaConfig) -> Result<SeparationResult> {
    cfg.validate()?;
    check_whitened(b, 1e-6)?;
    let c = b.channels();
    let data = b.data();
    let mut rng = SeededRng::new(cfg.seed);
    let (w, iterations, converged) = match cfg.ortho {
        Orthogonalization::Deflation => {
            let mut w = Array2::<f64>::zeros((0, c));
            let mut iterations = Vec::with_capacity(c);
            let mut converged = Vec::with_capacity(c);
            for _ in 0..c {
                let mut w0 = Array1::from(rng.unit_vector(c));
                gram_schmidt(&mut w0, &w);
                normalize(&mut w0);
                let unit = run_unit(data, w0, Some(&w), cfg);
                w.push_row(unit.w.view()).expect("row length matches");
                iterations.push(unit.iterations);
                converged.push(unit.converged);
            }
            (w, iterations, converged)
        }
        Orthogonalization::Symmetric => {
            let init = Array2::from_shape_fn((c, c), |_| rng.gaussian());
            let mut w = symmetric_orthogonalize(&init);
            let mut done = false;
            let mut it = 0;
            while it < cfg.max_iter {
                it += 1;
                let mut next = Array2::<f64>::zeros((c, c));
                for (i, row) in w.rows().into_iter().enumerate() {
                    next.row_mut(i).assign(&update(data, &row.to_owned(), cfg));
                }
                let next = symmetric_orthogonalize(&next);
                let lim = next
                    .rows()
                    .into_iter()
                    .zip(w.rows())
                    .map(|(a, b)| 1.0 - a.dot(&b).abs())
                    .fold(0.0, f64::max);
                w = next;
                if lim <= cfg.tol {
                    done = true;
                    break;
                }
            }
            (w, vec![it; c], vec![done; c])
        }
    };
    Ok(SeparationResult {
        w_full: w.clone(),
        w,
        iterations,
        converged,
        assignment: Assignment::identity(c),
    })
}

/// `Y = W * whitener * (S - mean)`, rows arranged by `result.assignment`.
pub fn unmix(
    s: &MultichannelSignal,
    result: &SeparationResult,
    transform: &WhiteningTransform,
) -> Result<MultichannelSignal> {
    if s.channels() != result.channels() || transform.channels() != result.channels() {
        return Err(Error::DimensionMismatch(format!(
            "signal has {} channels, separation {}, whitening {}",
            s.channels(),
            result.channels(),
            transform.channels()
        )));
    }
    let b = transform.apply(s)?;
    let raw = result.w.dot(b.data());
    let a = &result.assignment;
    let mut out = Array2::<f64>::zeros(raw.raw_dim());
    for (label, (&c, &sign)) in a.order.iter().zip(&a.signs).enumerate() {
        out.row_mut(label).assign(&(&raw.row(c) * sign));
    }
    MultichannelSignal::new(out, s.sample_rate())
}

/// Output of the full center → whiten → fit → unmix → identify chain.
#[derive(Debug, Clone)]
pub struct Separation {
    pub components: MultichannelSignal,
    pub result: SeparationResult,
    pub transform: WhiteningTransform,
}

/// Separates raw mixtures. When `expected_freqs` is given, components are
/// ordered and signed by [`identify_components`]; otherwise they keep the
/// order in which the units were estimated.
///
/// Units that fail to converge are flagged in the result, not reported as
/// an error.
pub fn separate(
    s: &MultichannelSignal,
    cfg: &FastIcaConfig,
    expected_freqs: Option<&[f64]>,
) -> Result<Separation> {
    let (b, transform) = preprocess::center_and_whiten(s)?;
    let mut result = fit(&b, cfg)?;
    result.w_full = result.w.dot(&transform.whitener);
    if let Some(freqs) = expected_freqs {
        let raw = MultichannelSignal::new(result.w.dot(b.data()), s.sample_rate())?;
        result.assignment = identify_components(&raw, freqs)?;
    }
    let components = unmix(s, &result, &transform)?;
    Ok(Separation {
        components,
        result,
        transform,
    })
}
