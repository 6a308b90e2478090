//! Composite pulse bank: the summed modulated prototype g and the overall
//! matched response eta = g conv conj(reversed g).

use crate::config::WaveformConfig;
use crate::error::Result;
use crate::fft::convolve;
use crate::filter::PrototypeFilter;
use crate::plan::SubcarrierPlan;
use num_complex::Complex64;
use std::f64::consts::TAU;

/// Transmit filter-bank impulse response and its matched cascade.
#[derive(Debug, Clone)]
pub struct PulseBank {
    /// g[m] for m in [-half, +half] at the full rate.
    pub g: Vec<Complex64>,
    /// eta[m] for m in [-2*half, +2*half]; conjugate-symmetric.
    pub eta: Vec<Complex64>,
    /// Half length of g in full-rate samples (equals the prototype's).
    pub half: usize,
}

/// Sum the modulated prototype over all subcarriers:
/// g[m] = sum_k gains[k] * p[m] * exp(j 2 pi (f_k/f_s) m).
pub fn build_pulse_bank(
    plan: &SubcarrierPlan,
    proto: &PrototypeFilter,
    cfg: &WaveformConfig,
) -> Result<PulseBank> {
    cfg.validate()?;
    plan.validate()?;
    let half = proto.half_full as i64;
    let fs = cfg.sample_rate();
    let freqs = plan.frequencies();
    let mut g = vec![Complex64::new(0.0, 0.0); 2 * proto.half_full + 1];
    for (k, &fk) in freqs.iter().enumerate() {
        let gain = plan.gains[k];
        let step = TAU * fk / fs;
        for (i, slot) in g.iter_mut().enumerate() {
            let m = i as i64 - half;
            let phase = step * m as f64;
            *slot += gain * proto.taps_full[i] * Complex64::new(phase.cos(), phase.sin());
        }
    }

    // eta = g conv conj(g[-m])
    let matched: Vec<Complex64> = g.iter().rev().map(|v| v.conj()).collect();
    let eta = convolve(&g, &matched);
    Ok(PulseBank { g, eta, half: proto.half_full })
}

impl PulseBank {
    /// Center index of eta (the zero-lag sample).
    pub fn eta_center(&self) -> usize {
        self.eta.len() / 2
    }

    /// Count strict local maxima of |eta| at or above `ratio` times the
    /// center magnitude.
    pub fn eta_peaks_above(&self, ratio: f64) -> usize {
        let mags: Vec<f64> = self.eta.iter().map(|v| v.norm()).collect();
        let level = ratio * mags[self.eta_center()];
        let mut count = 0;
        for i in 0..mags.len() {
            let left = if i == 0 { 0.0 } else { mags[i - 1] };
            let right = if i + 1 == mags.len() { 0.0 } else { mags[i + 1] };
            if mags[i] >= level && mags[i] > left && mags[i] >= right {
                count += 1;
            }
        }
        count
    }
}
