//! Normalized matched filter at the contiguous rate.
//!
//! The filter cascades the matched filter conj(g_c[-m']) with a per-bin
//! normalization 1/max(psd, floor) that equalizes the subcarrier bands and
//! suppresses partial-band interference. The matched part carries the
//! conjugate spreading gains, so the cascade removes their effect.

use crate::config::WaveformConfig;
use crate::error::{Error, Result};
use crate::fft::{fft_inplace, ifft_inplace};
use crate::filter::PrototypeFilter;
use crate::plan::SubcarrierPlan;
use num_complex::Complex64;
use std::f64::consts::TAU;

/// Time-limited NMF taps plus the normalization profile used to build them.
#[derive(Debug, Clone)]
pub struct NmfFilter {
    /// `2*half + 1` taps at the contiguous rate, center at index `half`.
    pub taps: Vec<Complex64>,
    pub half: usize,
    /// Per-bin normalization weights on the design grid.
    pub normalization: Vec<f64>,
}

/// Design-grid length used for the per-bin noise PSD estimate.
pub fn nmf_grid_len(cfg: &WaveformConfig) -> usize {
    (8 * cfg.filter_half_len_contiguous()).next_power_of_two()
}

/// Prototype taps at the contiguous rate: every u-th full-rate tap.
pub fn contiguous_prototype(proto: &PrototypeFilter, expansion: usize) -> Vec<f64> {
    let half_c = proto.half_full / expansion;
    (0..=2 * half_c)
        .map(|i| {
            let r = i as i64 - half_c as i64;
            proto.full_at(r * expansion as i64)
        })
        .collect()
}

/// Build the normalized matched filter for a plan.
///
/// `noise_psd` holds strictly nonnegative per-bin noise-plus-interference
/// power estimates on the [`nmf_grid_len`] grid (bin 0 at DC, wrapping);
/// pass an empty slice for a white (flat) profile.
pub fn build_nmf(
    plan: &SubcarrierPlan,
    proto: &PrototypeFilter,
    cfg: &WaveformConfig,
    noise_psd: &[f64],
) -> Result<NmfFilter> {
    cfg.validate()?;
    let grid = nmf_grid_len(cfg);
    let half = cfg.filter_half_len_contiguous();
    if grid < 2 * (2 * half + 1) {
        return Err(Error::InvalidConfig("NMF design grid too short".into()));
    }
    let psd: Vec<f64> = if noise_psd.is_empty() {
        vec![1.0; grid]
    } else if noise_psd.len() == grid {
        noise_psd.to_vec()
    } else {
        return Err(Error::LengthMismatch { expected: grid, got: noise_psd.len() });
    };
    if psd.iter().any(|&v| !v.is_finite() || v < 0.0) {
        return Err(Error::InvalidConfig("noise PSD weights must be finite and nonnegative".into()));
    }

    // floor at 1e-3 of the median to keep the normalization bounded
    let mut sorted = psd.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[grid / 2].max(1e-300);
    let floor = 1e-3 * median;
    let normalization: Vec<f64> = psd.iter().map(|&v| 1.0 / v.max(floor)).collect();
    // scale so a flat profile yields unit weights
    let mean_w = normalization.iter().sum::<f64>() / grid as f64;
    let normalization: Vec<f64> = normalization.iter().map(|w| w / mean_w).collect();

    // contiguous-band transmit pulse g_c with the plan's gains
    let p_c = contiguous_prototype(proto, plan.expansion);
    let c_plan = plan.contiguous_equivalent();
    let rate = cfg.contiguous_rate();
    let mut g_c = vec![Complex64::new(0.0, 0.0); 2 * half + 1];
    for (k, &fk) in c_plan.frequencies().iter().enumerate() {
        let gain = c_plan.gains[k];
        let step = TAU * fk / rate;
        for (i, slot) in g_c.iter_mut().enumerate() {
            let r = i as i64 - half as i64;
            let phase = step * r as f64;
            *slot += gain * p_c[i] * Complex64::new(phase.cos(), phase.sin());
        }
    }

    // frequency response conj(G_c) * q on the design grid, zero-phase wrap
    let mut spec = vec![Complex64::new(0.0, 0.0); grid];
    for (i, &v) in g_c.iter().enumerate() {
        let r = i as i64 - half as i64;
        spec[r.rem_euclid(grid as i64) as usize] = v;
    }
    fft_inplace(&mut spec);
    for (s, &w) in spec.iter_mut().zip(normalization.iter()) {
        *s = s.conj() * w;
    }
    ifft_inplace(&mut spec);
    let scale = 1.0 / grid as f64;
    let taps: Vec<Complex64> = (0..=2 * half)
        .map(|i| {
            let r = i as i64 - half as i64;
            spec[r.rem_euclid(grid as i64) as usize] * scale
        })
        .collect();

    Ok(NmfFilter { taps, half, normalization })
}

impl NmfFilter {
    /// Raw DFT of the taps wrapped onto a ring of length `n` (zero-phase).
    pub fn spectrum(&self, n: usize) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let half = self.half as i64;
        for (i, &v) in self.taps.iter().enumerate() {
            let r = i as i64 - half;
            buf[r.rem_euclid(n as i64) as usize] += v;
        }
        fft_inplace(&mut buf);
        buf
    }
}
