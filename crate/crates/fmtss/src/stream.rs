//! Complex baseband sample streams.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// A complex baseband sequence tagged with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream {
    pub samples: Vec<Complex64>,
    /// Sample rate in Hz.
    pub rate: f64,
}

impl SampleStream {
    pub fn new(samples: Vec<Complex64>, rate: f64) -> Self {
        Self { samples, rate }
    }

    pub fn zeros(len: usize, rate: f64) -> Self {
        Self { samples: vec![Complex64::new(0.0, 0.0); len], rate }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean power per sample.
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    pub fn check_rate(&self, other: f64) -> Result<()> {
        if (self.rate - other).abs() > 1e-9 * self.rate.abs().max(1.0) {
            return Err(Error::RateMismatch { left: self.rate, right: other });
        }
        Ok(())
    }

    /// Element-wise sum of two streams at the same rate; the shorter one is
    /// zero-extended.
    pub fn add(&self, other: &SampleStream) -> Result<SampleStream> {
        self.check_rate(other.rate)?;
        let n = self.len().max(other.len());
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (o, s) in out.iter_mut().zip(self.samples.iter()) {
            *o += s;
        }
        for (o, s) in out.iter_mut().zip(other.samples.iter()) {
            *o += s;
        }
        Ok(SampleStream::new(out, self.rate))
    }
}
