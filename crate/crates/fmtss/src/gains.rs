//! Crest-factor minimization of the multitone sum and PAPR measurement.
//!
//! The spreading gains are unit-magnitude scalars chosen to minimize the
//! crest factor of beta(t) = sum_k gains[k] exp(j 2 pi f_k t) over one
//! fundamental period. The minimization alternates between clipping the
//! oversampled multitone signal and projecting back onto unit-magnitude
//! per-tone coefficients, keeping the best gains seen.

use crate::error::{Error, Result};
use crate::fft::{fft_inplace, ifft_inplace};
use crate::plan::SubcarrierPlan;
use num_complex::Complex64;

/// Peak-to-RMS ratio (linear) of a sampled signal.
pub fn crest_factor(samples: &[Complex64]) -> f64 {
    let peak = samples.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mean_sq = samples.iter().map(|v| v.norm_sqr()).sum::<f64>() / samples.len() as f64;
    if mean_sq == 0.0 {
        return 0.0;
    }
    peak / mean_sq.sqrt()
}

/// Peak-to-average power ratio in dB; all-zero input is an error.
pub fn measure_papr(samples: &[Complex64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::ZeroSignal);
    }
    let peak_sq = samples.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    let mean_sq = samples.iter().map(|v| v.norm_sqr()).sum::<f64>() / samples.len() as f64;
    if mean_sq == 0.0 {
        return Err(Error::ZeroSignal);
    }
    Ok(10.0 * (peak_sq / mean_sq).log10())
}

/// Tone bin positions of the plan on an `n_os`-point one-period grid.
fn tone_bins(plan: &SubcarrierPlan, n_os: usize) -> Vec<usize> {
    plan.frequencies()
        .iter()
        .map(|&f| {
            let harmonic = (f / plan.symbol_rate).round() as i64;
            harmonic.rem_euclid(n_os as i64) as usize
        })
        .collect()
}

/// Synthesize one period of beta(t) from gains placed at the tone bins.
fn synthesize_beta(gains: &[Complex64], bins: &[usize], n_os: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); n_os];
    for (g, &b) in gains.iter().zip(bins.iter()) {
        buf[b] += g;
    }
    ifft_inplace(&mut buf);
    buf
}

/// Crest factor of the plan's multitone signal over one symbol period,
/// oversampled at least 4x above the multitone Nyquist rate.
pub fn multitone_crest(plan: &SubcarrierPlan) -> f64 {
    let n_os = oversampled_len(plan);
    let bins = tone_bins(plan, n_os);
    crest_factor(&synthesize_beta(&plan.gains, &bins, n_os))
}

fn oversampled_len(plan: &SubcarrierPlan) -> usize {
    (16 * plan.subcarriers * plan.expansion).next_power_of_two().max(64)
}

/// Deterministic chirp phases matched to the plan's tone positions.
///
/// A linear-FM sweep across the occupied band has a near-flat envelope, so
/// its stationary-phase tone coefficients make a strong seed-free starting
/// point for the clipping iteration. The all-ones start is a fixed point of
/// the phase-only projection for symmetric tone layouts and cannot improve.
fn chirp_gains(plan: &SubcarrierPlan) -> Vec<Complex64> {
    use std::f64::consts::PI;
    let span = 2.0 * (plan.subcarriers * plan.expansion) as f64;
    plan.frequencies()
        .iter()
        .map(|&f| {
            let harmonic = f / plan.symbol_rate;
            Complex64::from_polar(1.0, -PI * harmonic * harmonic / span)
        })
        .collect()
}

/// Quadratic phases over the tone order. On regularly spaced tone sets
/// the frequency-based chirp aliases to a near-degenerate pattern, while
/// the order-based form stays spread for any grid.
fn order_quadratic_gains(count: usize) -> Vec<Complex64> {
    use std::f64::consts::PI;
    (0..count)
        .map(|k| Complex64::from_polar(1.0, PI * (k * k) as f64 / count as f64))
        .collect()
}

/// Minimize the multitone crest factor by iterative peak clipping with a
/// per-tone unit-magnitude projection. Deterministic given the plan; the
/// returned gains never have a larger crest factor than the inputs.
pub fn optimize_gains(plan: &SubcarrierPlan, max_iters: usize, tol: f64) -> Result<SubcarrierPlan> {
    plan.validate()?;
    let mut out = plan.clone();
    if plan.subcarriers == 1 {
        return Ok(out);
    }
    let n_os = oversampled_len(plan);
    let bins = tone_bins(plan, n_os);

    let mut best_gains = plan.gains.clone();
    let mut best_crest = crest_factor(&synthesize_beta(&plan.gains, &bins, n_os));
    for candidate in [chirp_gains(plan), order_quadratic_gains(plan.subcarriers)] {
        let crest = crest_factor(&synthesize_beta(&candidate, &bins, n_os));
        if crest < best_crest {
            best_crest = crest;
            best_gains = candidate;
        }
    }
    let mut gains = best_gains.clone();

    for _ in 0..max_iters {
        let beta = synthesize_beta(&gains, &bins, n_os);
        let rms = (beta.iter().map(|v| v.norm_sqr()).sum::<f64>() / n_os as f64).sqrt();
        if rms == 0.0 {
            break;
        }
        // clip slightly below the best crest achieved so far
        let clip_level = rms * (1.0 + 0.8 * (best_crest - 1.0)).max(1.0);
        let mut clipped: Vec<Complex64> = beta
            .iter()
            .map(|&v| {
                let a = v.norm();
                if a > clip_level {
                    v * (clip_level / a)
                } else {
                    v
                }
            })
            .collect();
        fft_inplace(&mut clipped);
        for (g, &b) in gains.iter_mut().zip(bins.iter()) {
            let coeff = clipped[b];
            let a = coeff.norm();
            if a > 1e-300 {
                *g = coeff / a;
            }
        }
        let crest = crest_factor(&synthesize_beta(&gains, &bins, n_os));
        if crest < best_crest {
            let improvement = (best_crest - crest) / best_crest;
            best_crest = crest;
            best_gains = gains.clone();
            if improvement < tol {
                break;
            }
        }
    }

    out.gains = best_gains;
    Ok(out)
}

/// Default iteration budget and tolerance for the gain optimizer.
pub fn optimize_gains_default(plan: &SubcarrierPlan) -> Result<SubcarrierPlan> {
    optimize_gains(plan, 200, 1e-4)
}
