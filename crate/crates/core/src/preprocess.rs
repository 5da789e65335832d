//! Centering and whitening ahead of fastICA.
//!
//! Data are centered per channel, the covariance `Σ = R Rᵀ / N` is
//! eigendecomposed as `Σ = U Λ Uᵀ`, and the whitened data are
//! `B = Λ^(-1/2) Uᵀ R`, which has identity covariance.
//!
//! Note the exponent: scaling the rotated data by `Λ^(+1/2)` would multiply
//! each variance by `λ_i²` instead of normalizing it, so the inverse square
//! root is the only choice that yields unit-variance outputs.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::io::KeyValues;
use crate::linalg;
use crate::signal::MultichannelSignal;

/// Relative eigenvalue floor below which the covariance is treated as
/// rank-deficient.
pub const RANK_EPSILON: f64 = 1e-12;

/// Everything needed to map raw data into the whitened space and back.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningTransform {
    pub mean: Array1<f64>,
    /// Orthogonal eigenvector matrix `U`, one eigenvector per column.
    pub eigvecs: Array2<f64>,
    /// Covariance eigenvalues, descending.
    pub eigvals: Array1<f64>,
    /// `Λ^(-1/2) Uᵀ`, applied to centered data.
    pub whitener: Array2<f64>,
    /// `U Λ^(1/2)`, the inverse of `whitener`.
    pub dewhitener: Array2<f64>,
}

impl WhiteningTransform {
    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    /// `whitener * (s - mean)`.
    pub fn apply(&self, s: &MultichannelSignal) -> Result<MultichannelSignal> {
        if s.channels() != self.channels() {
            return Err(Error::DimensionMismatch(format!(
                "transform has {} channels, signal has {}",
                self.channels(),
                s.channels()
            )));
        }
        let centered = s.data() - &self.mean.view().insert_axis(Axis(1));
        MultichannelSignal::new(self.whitener.dot(&centered), s.sample_rate())
    }

    /// `dewhitener * b + mean`.
    pub fn dewhiten(&self, b: &MultichannelSignal) -> Result<MultichannelSignal> {
        if b.channels() != self.channels() {
            return Err(Error::DimensionMismatch(format!(
                "transform has {} channels, signal has {}",
                self.channels(),
                b.channels()
            )));
        }
        let raw = self.dewhitener.dot(b.data()) + self.mean.view().insert_axis(Axis(1));
        MultichannelSignal::new(raw, b.sample_rate())
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.push("whitening.channels", self.channels());
        kv.push_vector("whitening.mean", self.mean.iter().copied());
        kv.push_vector("whitening.eigvals", self.eigvals.iter().copied());
        kv.push_matrix("whitening.eigvecs", &self.eigvecs);
        kv.push_matrix("whitening.whitener", &self.whitener);
        kv.push_matrix("whitening.dewhitener", &self.dewhitener);
        kv
    }

    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let c: usize = kv.parse("whitening.channels")?;
        Ok(Self {
            mean: Array1::from(kv.vector("whitening.mean", c)?),
            eigvals: Array1::from(kv.vector("whitening.eigvals", c)?),
            eigvecs: kv.matrix("whitening.eigvecs", c, c)?,
            whitener: kv.matrix("whitening.whitener", c, c)?,
            dewhitener: kv.matrix("whitening.dewhitener", c, c)?,
        })
    }
}

/// Subtracts each channel's sample mean.
pub fn center(s: &MultichannelSignal) -> Result<(MultichannelSignal, Array1<f64>)> {
    let mean = s
        .data()
        .mean_axis(Axis(1))
        .ok_or_else(|| Error::InvalidParameter("empty signal".into()))?;
    let r = s.data() - &mean.view().insert_axis(Axis(1));
    Ok((MultichannelSignal::new(r, s.sample_rate())?, mean))
}

/// `Σ = R Rᵀ / N` for centered `R`, symmetrized.
pub fn covariance(r: &MultichannelSignal) -> Result<Array2<f64>> {
    for (i, row) in r.data().rows().into_iter().enumerate() {
        let n = row.len() as f64;
        let mean = row.sum() / n;
        let rms = (row.dot(&row) / n).sqrt();
        if mean.abs() > 1e-8 * rms {
            return Err(Error::NotCentered { channel: i, mean });
        }
    }
    let n = r.len() as f64;
    let sigma = r.data().dot(&r.data().t()) / n;
    Ok((&sigma + &sigma.t()) * 0.5)
}

/// Eigendecomposition `Σ = U diag(λ) Uᵀ` with eigenvalues descending.
pub fn eigendecompose(sigma: &Array2<f64>) -> Result<(Array2<f64>, Array1<f64>)> {
    if sigma.nrows() != sigma.ncols() {
        return Err(Error::DimensionMismatch("covariance must be square".into()));
    }
    let asym = linalg::max_asymmetry(sigma);
    if asym > 1e-10 * linalg::frobenius(sigma).max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let (vals, u) = linalg::symmetric_eigen(sigma);
    Ok((u, vals))
}

/// Whitens centered data, returning `B` with identity covariance and the
/// transform that produced it.
pub fn whiten(r: &MultichannelSignal) -> Result<(MultichannelSignal, WhiteningTransform)> {
    let sigma = covariance(r)?;
    let (u, vals) = eigendecompose(&sigma)?;
    let threshold = RANK_EPSILON * vals[0].max(0.0);
    if let Some(&bad) = vals.iter().find(|&&v| v <= threshold) {
        return Err(Error::RankDeficient {
            eigval: bad,
            threshold,
        });
    }
    let inv_sqrt = vals.mapv(|v| 1.0 / v.sqrt());
    let sqrt = vals.mapv(f64::sqrt);
    let whitener = &u.t() * &inv_sqrt.view().insert_axis(Axis(1));
    let dewhitener = &u * &sqrt.view().insert_axis(Axis(0));
    let mean = r
        .data()
        .mean_axis(Axis(1))
        .expect("signal is non-empty");
    let b = MultichannelSignal::new(whitener.dot(r.data()), r.sample_rate())?;
    Ok((
        b,
        WhiteningTransform {
            mean,
            eigvecs: u,
            eigvals: vals,
            whitener,
            dewhitener,
        },
    ))
}

/// [`center`] followed by [`whiten`]; the transform records the removed mean.
pub fn center_and_whiten(
    s: &MultichannelSignal,
) -> Result<(MultichannelSignal, WhiteningTransform)> {
    let (r, mean) = center(s)?;
    let (b, mut transform) = whiten(&r)?;
    transform.mean = mean;
    Ok((b, transform))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use ndarray::array;
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    fn sig(rows: Array2<f64>) -> MultichannelSignal {
        MultichannelSignal::new(rows, 1.0).unwrap()
    }

    fn noise(c: usize, n: usize, seed: u64) -> MultichannelSignal {
        let mut rng = SeededRng::new(seed);
        sig(Array2::from_shape_fn((c, n), |_| rng.gaussian()))
    }

    #[test]
    fn center_examples() {
        let (r, m) = center(&sig(array![[5.0, 5.0, 5.0], [1.0, 2.0, 3.0]])).unwrap();
        assert_eq!(m.to_vec(), vec![5.0, 2.0]);
        assert_eq!(r.channel_vec(0), vec![0.0; 3]);
        let (r, m) = center(&sig(array![[1.0, 2.0, 3.0, 4.0]])).unwrap();
        assert_eq!(m[0], 2.5);
        assert_eq!(r.channel_vec(0), vec![-1.5, -0.5, 0.5, 1.5]);
        let tone: Vec<f64> = (0..800).map(|k| (TAU * k as f64 / 80.0).sin()).collect();
        let (r, _) = center(&MultichannelSignal::single(tone.clone(), 1.0).unwrap()).unwrap();
        for (a, b) in r.channel_vec(0).iter().zip(&tone) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn covariance_examples() {
        let c = covariance(&sig(array![[-1.5, -0.5, 0.5, 1.5]])).unwrap();
        assert_eq!(c[[0, 0]], 1.25);
        let same = covariance(&sig(array![[-1.0, 1.0, -2.0, 2.0], [-1.0, 1.0, -2.0, 2.0]])).unwrap();
        assert!(same.iter().all(|&v| v == same[[0, 0]]));
        assert!(matches!(
            covariance(&sig(array![[1.0, 2.0]])),
            Err(Error::NotCentered { channel: 0, .. })
        ));
    }

    #[test]
    fn covariance_of_orthogonal_tones() {
        // Sampled sin(2 pi 1 k / 80) and sin(2 pi 3 k / 80) over whole periods:
        // each sin^2 averages to 1/2 and the cross product averages to zero.
        let n = 800;
        let a: Vec<f64> = (0..n).map(|k| (TAU * k as f64 / 80.0).sin()).collect();
        let b: Vec<f64> = (0..n).map(|k| (TAU * 3.0 * k as f64 / 80.0).sin()).collect();
        let c = covariance(&MultichannelSignal::from_channels(&[a, b], 1.0).unwrap()).unwrap();
        assert!((c[[0, 0]] - 0.5).abs() < 1e-14 && (c[[1, 1]] - 0.5).abs() < 1e-14);
        assert!(c[[0, 1]].abs() < 1e-14);
    }

    #[test]
    fn eigendecompose_examples() {
        let (u, v) = eigendecompose(&array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(v.to_vec(), vec![1.0, 1.0]);
        assert!(linalg::identity_deviation(&u.dot(&u.t())) < 1e-15);

        let (u, v) = eigendecompose(&array![[4.0, 0.0], [0.0, 9.0]]).unwrap();
        assert_eq!(v.to_vec(), vec![9.0, 4.0]);
        assert_eq!(u, array![[0.0, 1.0], [1.0, 0.0]]);

        let (u, v) = eigendecompose(&array![[4.0, 0.0, 0.0], [0.0, 9.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(v.to_vec(), vec![9.0, 4.0, 1.0]);
        assert_eq!(u.column(0).to_vec(), vec![0.0, 1.0, 0.0]);

        assert!(matches!(
            eigendecompose(&array![[1.0, 0.5], [0.0, 1.0]]),
            Err(Error::NotSymmetric(_))
        ));
    }

    #[test]
    fn whitening_reaches_identity() {
        let mut s = noise(3, 20_000, 5);
        let a = array![[1.0, 0.5, 0.2], [0.1, 2.0, 0.3], [0.4, 0.0, 0.5]];
        s = sig(a.dot(s.data()));
        let (b, t) = center_and_whiten(&s).unwrap();
        let cov = b.data().dot(&b.data().t()) / b.len() as f64;
        assert!(linalg::identity_deviation(&cov) < 1e-10);
        assert!(linalg::identity_deviation(&t.whitener.dot(&t.dewhitener)) < 1e-10);
        assert!(linalg::identity_deviation(&t.eigvecs.dot(&t.eigvecs.t())) < 1e-10);
        let back = t.dewhiten(&b).unwrap();
        let err = (back.data() - s.data()).mapv(|e| e * e).mean().unwrap().sqrt();
        assert!(err < 1e-10);
        assert_eq!(t.apply(&s).unwrap(), b);
    }

    #[test]
    fn white_input_maps_to_rotation() {
        let s = noise(2, 200_000, 9);
        let (_, t) = center_and_whiten(&s).unwrap();
        let wwt = t.whitener.dot(&t.whitener.t());
        assert!(linalg::identity_deviation(&wwt) < 0.02);
    }

    #[test]
    fn duplicated_channel_is_rank_deficient() {
        let s = noise(1, 1000, 1);
        let dup = MultichannelSignal::stack(&[&s, &s]).unwrap();
        assert!(matches!(
            center_and_whiten(&dup),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn kv_round_trip() {
        let (_, t) = center_and_whiten(&noise(2, 500, 2)).unwrap();
        let text = t.to_kv().to_string();
        let back = WhiteningTransform::from_kv(&text.parse().unwrap()).unwrap();
        assert_eq!(back, t);
    }

    proptest! {
        #[test]
        fn whitening_is_scale_invariant(scale in 1e-3f64..1e3, seed in 0u64..1000) {
            let s = noise(2, 2000, seed);
            let mixed = sig(array![[1.0, 0.6], [0.2, 1.0]].dot(s.data()));
            let (b1, _) = center_and_whiten(&mixed).unwrap();
            let (b2, _) = center_and_whiten(&sig(mixed.data() * scale)).unwrap();
            for (r1, r2) in b1.data().rows().into_iter().zip(b2.data().rows()) {
                let same = r1.iter().zip(r2.iter()).all(|(x, y)| (x - y).abs() < 1e-8);
                let flipped = r1.iter().zip(r2.iter()).all(|(x, y)| (x + y).abs() < 1e-8);
                prop_assert!(same || flipped);
            }
        }

        #[test]
        fn eigen_reconstruction_up_to_cond_1e6(
            log_cond in 0.0f64..6.0,
            angle in 0.0f64..TAU,
            scale in 1e-3f64..1e3,
        ) {
            let (s, c) = angle.sin_cos();
            let u = array![[c, -s], [s, c]];
            let lam = array![scale, scale / 10f64.powf(log_cond)];
            let sigma = u.dot(&Array2::from_diag(&lam)).dot(&u.t());
            let sigma = (&sigma + &sigma.t()) * 0.5;
            let (uu, vals) = eigendecompose(&sigma).unwrap();
            let rec = uu.dot(&Array2::from_diag(&vals)).dot(&uu.t());
            prop_assert!(linalg::frobenius(&(rec - &sigma)) / linalg::frobenius(&sigma) < 1e-9);
        }
    }
}
