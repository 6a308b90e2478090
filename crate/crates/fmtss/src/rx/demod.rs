//! Fast-convolution receive pipeline: blocked remap plus NMF filtering.
//!
//! The received full-rate stream is processed in overlapping blocks of
//! `N_y = M` samples (the remap operator's transform size). Each block is
//! transformed, reduced to the retained bins, multiplied by the NMF
//! spectrum on the reduced ring, and inverse-transformed; `L_g` samples at
//! each edge are discarded. Output sample `m'` is aligned with input
//! sample `u*m'`.
//!
//! [`demod_fc_reference`] evaluates the same block operator with literal
//! correlation and convolution sums, independent of the FFT machinery, and
//! is the oracle the fast path is tested against.

use crate::config::WaveformConfig;
use crate::error::{Error, Result};
use crate::fft::{fft_inplace, ifft_inplace};
use crate::rx::nmf::NmfFilter;
use crate::rx::remap::RemapOperator;
use crate::stream::SampleStream;
use num_complex::Complex64;
use std::f64::consts::TAU;

fn check_sizes(op: &RemapOperator, nmf: &NmfFilter, cfg: &WaveformConfig) -> Result<()> {
    let n_y = op.input_len;
    if !n_y.is_power_of_two() {
        return Err(Error::InvalidConfig(format!("receive block size {n_y} must be a power of two")));
    }
    let l_p = nmf.half * op.expansion;
    if 2 * l_p > n_y {
        return Err(Error::InvalidConfig("filter span exceeds half the receive block".into()));
    }
    if op.expansion != cfg.expansion {
        return Err(Error::InvalidConfig("remap expansion does not match the configuration".into()));
    }
    Ok(())
}

/// Number of contiguous-rate output samples for an input length.
fn output_len(input_len: usize, u: usize) -> usize {
    input_len.div_ceil(u)
}

/// Blocked remap + NMF at the contiguous rate (fast path).
pub fn demod_fc(
    rx: &SampleStream,
    op: &RemapOperator,
    nmf: &NmfFilter,
    cfg: &WaveformConfig,
) -> Result<SampleStream> {
    cfg.validate()?;
    check_sizes(op, nmf, cfg)?;
    rx.check_rate(cfg.sample_rate())?;

    let u = op.expansion;
    let n_y = op.input_len;
    let n_out = op.output_len;
    let l_g = nmf.half;
    let l_p = l_g * u;
    let advance_out = n_out - 2 * l_g;
    let advance_in = n_y - 2 * l_p;

    let nmf_spec = nmf.spectrum(n_out);
    let out_total = output_len(rx.len(), u);
    let mut out = vec![Complex64::new(0.0, 0.0); out_total];
    let scale = 1.0 / (n_out as f64 * (u as f64).sqrt());

    let mut buf = vec![Complex64::new(0.0, 0.0); n_y];
    let mut reduced = vec![Complex64::new(0.0, 0.0); n_out];

    let mut block = 0usize;
    loop {
        let out_start = block * advance_out;
        if out_start >= out_total {
            break;
        }
        let in_start = block as i64 * advance_in as i64 - l_p as i64;
        for (j, slot) in buf.iter_mut().enumerate() {
            let idx = in_start + j as i64;
            *slot = if idx >= 0 && (idx as usize) < rx.len() {
                rx.samples[idx as usize]
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        fft_inplace(&mut buf);
        for (r, &q) in reduced.iter_mut().zip(op.retained_bins.iter()) {
            *r = buf[q];
        }
        for (r, s) in reduced.iter_mut().zip(nmf_spec.iter()) {
            *r *= s;
        }
        ifft_inplace(&mut reduced);
        for j in 0..advance_out {
            let oi = out_start + j;
            if oi < out_total {
                out[oi] = reduced[l_g + j] * scale;
            }
        }
        block += 1;
    }

    Ok(SampleStream::new(out, cfg.contiguous_rate()))
}

/// Same block operator as [`demod_fc`], evaluated with direct sums.
pub fn demod_fc_reference(
    rx: &SampleStream,
    op: &RemapOperator,
    nmf: &NmfFilter,
    cfg: &WaveformConfig,
) -> Result<SampleStream> {
    cfg.validate()?;
    check_sizes(op, nmf, cfg)?;
    rx.check_rate(cfg.sample_rate())?;

    let u = op.expansion;
    let n_y = op.input_len;
    let n_out = op.output_len;
    let l_g = nmf.half;
    let l_p = l_g * u;
    let advance_out = n_out - 2 * l_g;
    let advance_in = n_y - 2 * l_p;

    let out_total = output_len(rx.len(), u);
    let mut out = vec![Complex64::new(0.0, 0.0); out_total];
    let scale = 1.0 / (n_out as f64 * (u as f64).sqrt());

    let mut block = 0usize;
    loop {
        let out_start = block * advance_out;
        if out_start >= out_total {
            break;
        }
        let in_start = block as i64 * advance_in as i64 - l_p as i64;
        let grab = |j: i64| -> Complex64 {
            let idx = in_start + j;
            if idx >= 0 && (idx as usize) < rx.len() {
                rx.samples[idx as usize]
            } else {
                Complex64::new(0.0, 0.0)
            }
        };
        // retained-bin coefficients by direct correlation
        let mut reduced = vec![Complex64::new(0.0, 0.0); n_out];
        for (q_out, &q_in) in op.retained_bins.iter().enumerate() {
            let w = -TAU * q_in as f64 / n_y as f64;
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n_y {
                let ph = w * j as f64;
                acc += grab(j as i64) * Complex64::new(ph.cos(), ph.sin());
            }
            reduced[q_out] = acc;
        }
        // contiguous-rate block by direct inverse sum
        let mut time = vec![Complex64::new(0.0, 0.0); n_out];
        for (m, t) in time.iter_mut().enumerate() {
            let w = TAU * m as f64 / n_out as f64;
            let mut acc = Complex64::new(0.0, 0.0);
            for (q, &r) in reduced.iter().enumerate() {
                let ph = w * q as f64;
                acc += r * Complex64::new(ph.cos(), ph.sin());
            }
            *t = acc / n_out as f64;
        }
        // NMF as a direct cyclic convolution on the reduced ring
        for j in 0..advance_out {
            let oi = out_start + j;
            if oi >= out_total {
                break;
            }
            let m = l_g + j;
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, &tap) in nmf.taps.iter().enumerate() {
                let r = i as i64 - l_g as i64;
                let src = (m as i64 - r).rem_euclid(n_out as i64) as usize;
                acc += tap * time[src];
            }
            out[oi] = acc * (scale * n_out as f64);
        }
        block += 1;
    }

    Ok(SampleStream::new(out, cfg.contiguous_rate()))
}
