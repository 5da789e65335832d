//! Multichannel sampled waveforms.

use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

/// `C` channels of `N` real samples taken at a common sample rate.
///
/// Row `i` of [`data`](Self::data) is channel `i`. Measured detector outputs,
/// clean interference signals, centered and whitened data are all carried in
/// this type.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelSignal {
    data: Array2<f64>,
    sample_rate: f64,
}

impl MultichannelSignal {
    /// Wraps a `C x N` matrix. Requires `N >= 2`, at least one channel, finite
    /// samples and a positive finite sample rate.
    pub fn new(data: Array2<f64>, sample_rate: f64) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::InvalidParameter("signal has no channels".into()));
        }
        if data.ncols() < 2 {
            return Err(Error::InvalidParameter(format!(
                "signal needs at least 2 samples, got {}",
                data.ncols()
            )));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("signal samples"));
        }
        Ok(Self { data, sample_rate })
    }

    pub fn from_channels(channels: &[Vec<f64>], sample_rate: f64) -> Result<Self> {
        let n = channels.first().map_or(0, Vec::len);
        if channels.iter().any(|c| c.len() != n) {
            return Err(Error::DimensionMismatch(
                "channels have different lengths".into(),
            ));
        }
        let flat: Vec<f64> = channels.iter().flatten().copied().collect();
        let data = Array2::from_shape_vec((channels.len(), n), flat)
            .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        Self::new(data, sample_rate)
    }

    pub fn single(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        Self::from_channels(&[samples], sample_rate)
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    /// Always false: construction rejects empty signals.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn channel(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }

    pub fn channel_vec(&self, i: usize) -> Vec<f64> {
        self.data.row(i).to_vec()
    }

    /// Time of sample `k` in seconds.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 / self.sample_rate
    }

    /// Keeps samples `start..end` of every channel.
    pub fn slice_samples(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::InvalidParameter(format!(
                "sample range {start}..{end} outside 0..{}",
                self.len()
            )));
        }
        let data = self
            .data
            .slice(ndarray::s![.., start..end])
            .to_owned();
        Self::new(data, self.sample_rate)
    }

    /// Stacks channels of several signals sharing a rate and length.
    pub fn stack(parts: &[&MultichannelSignal]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidParameter("nothing to stack".into()))?;
        if parts
            .iter()
            .any(|p| p.len() != first.len() || p.sample_rate != first.sample_rate)
        {
            return Err(Error::DimensionMismatch(
                "stacked signals differ in length or rate".into(),
            ));
        }
        let views: Vec<_> = parts.iter().map(|p| p.data.view()).collect();
        let data = ndarray::concatenate(Axis(0), &views)
            .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        Self::new(data, first.sample_rate)
    }
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub(crate) fn mean_square(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_short_and_non_finite() {
        assert!(MultichannelSignal::new(array![[1.0]], 1.0).is_err());
        assert!(MultichannelSignal::new(array![[1.0, f64::NAN]], 1.0).is_err());
        assert!(MultichannelSignal::new(array![[1.0, 2.0]], 0.0).is_err());
        assert!(MultichannelSignal::from_channels(&[vec![1.0, 2.0], vec![1.0]], 1.0).is_err());
    }

    #[test]
    fn stack_and_slice() {
        let a = MultichannelSignal::single(vec![1.0, 2.0, 3.0], 10.0).unwrap();
        let b = MultichannelSignal::single(vec![4.0, 5.0, 6.0], 10.0).unwrap();
        let s = MultichannelSignal::stack(&[&a, &b]).unwrap();
        assert_eq!(s.channels(), 2);
        assert_eq!(s.slice_samples(1, 3).unwrap().data(), &array![[2.0, 3.0], [5.0, 6.0]]);
        assert!((s.time(5) - 0.5).abs() < 1e-15);
    }
}
