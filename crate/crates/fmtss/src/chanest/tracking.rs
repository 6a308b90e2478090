//! Per-pilot channel refresh.
//!
//! The preamble gives one high-quality impulse-response estimate at the
//! start of the packet; over a fading channel it goes stale within a few
//! coherence times. Each pilot window holds the matched cascade convolved
//! with the channel at that instant, so a regularized deconvolution by
//! the known cascade recovers the current remapped taps. Averaging across
//! neighboring pilots (well inside the coherence time) suppresses the
//! data-symbol leakage and noise.

use crate::chanest::pilots::PilotObservation;
use crate::error::{Error, Result};
use crate::fft::{fft_inplace, ifft_inplace};
use num_complex::Complex64;

/// Deconvolved channel taps at every pilot instant.
///
/// `cascade` is the overall matched response at the contiguous rate,
/// centered (odd length, may exceed the window and wrap); `delays` lists
/// the tracked contiguous-rate tap delays relative to the timing anchor.
/// Gains are averaged over a sliding window of `smooth_pilots` neighbors
/// on each side.
pub fn pilot_tap_gains(
    obs: &PilotObservation,
    cascade: &[Complex64],
    delays: &[i64],
    smooth_pilots: usize,
) -> Result<Vec<Vec<Complex64>>> {
    if cascade.len() % 2 == 0 {
        return Err(Error::InvalidConfig("cascade must have odd length".into()));
    }
    let n = obs.window_len;
    let n_pilots = obs.columns.len();
    if n_pilots == 0 {
        return Err(Error::InvalidConfig("no pilot windows".into()));
    }

    // cascade spectrum on the window ring, zero-phase wrap
    let half = (cascade.len() / 2) as i64;
    let mut eta_f = vec![Complex64::new(0.0, 0.0); n];
    for (i, &v) in cascade.iter().enumerate() {
        let r = i as i64 - half;
        eta_f[r.rem_euclid(n as i64) as usize] += v;
    }
    fft_inplace(&mut eta_f);
    let peak = eta_f.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    if peak <= 0.0 {
        return Err(Error::InvalidConfig("cascade has no energy".into()));
    }
    let lambda = 0.05 * peak;

    // Wiener deconvolution of every window
    let mut per_pilot: Vec<Vec<Complex64>> = Vec::with_capacity(n_pilots);
    for col in &obs.columns {
        let mut spec = col.clone();
        fft_inplace(&mut spec);
        for (s, e) in spec.iter_mut().zip(eta_f.iter()) {
            *s = *s * e.conj() / (e.norm_sqr() + lambda);
        }
        ifft_inplace(&mut spec);
        let scale = 1.0 / n as f64;
        per_pilot.push(spec.into_iter().map(|v| v * scale).collect());
    }

    // sliding average across pilots, then gather the requested delays
    let mut out = vec![vec![Complex64::new(0.0, 0.0); delays.len()]; n_pilots];
    for l in 0..n_pilots {
        let lo = l.saturating_sub(smooth_pilots);
        let hi = (l + smooth_pilots).min(n_pilots - 1);
        let count = (hi - lo + 1) as f64;
        for (j, &d) in delays.iter().enumerate() {
            let pos = (d - obs.window_start).rem_euclid(n as i64) as usize;
            let mut acc = Complex64::new(0.0, 0.0);
            for row in per_pilot.iter().take(hi + 1).skip(lo) {
                acc += row[pos];
            }
            out[l][j] = acc / count;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake_obs(columns: Vec<Vec<Complex64>>) -> PilotObservation {
        let window_len = columns[0].len();
        PilotObservation {
            columns,
            window_len,
            window_start: -((window_len / 2) as i64),
            pilot_spacing: 4e-3,
        }
    }

    // impulse-dominant cascade: spectrally flat like the matched response
    // across the occupied band
    fn sharp_cascade(half: i64) -> Vec<Complex64> {
        (-half..=half)
            .map(|r| {
                let v = match r.abs() {
                    0 => 1.0,
                    1 => 0.1,
                    _ => 0.0,
                };
                Complex64::new(v, 0.0)
            })
            .collect()
    }

    #[test]
    fn recovers_drifting_tap_gain() {
        // one tap whose phase rotates linearly across pilots
        let window = 128;
        let cascade = sharp_cascade(8);
        let n_pilots = 24;
        let tap_delay = 10i64;
        let columns: Vec<Vec<Complex64>> = (0..n_pilots)
            .map(|l| {
                let gain = Complex64::from_polar(1.0, 0.12 * l as f64);
                let mut col = vec![Complex64::new(0.0, 0.0); window];
                let center = tap_delay + (window / 2) as i64;
                for (i, &e) in cascade.iter().enumerate() {
                    let idx = center - 8 + i as i64;
                    if idx >= 0 && (idx as usize) < window {
                        col[idx as usize] += gain * e;
                    }
                }
                col
            })
            .collect();
        let obs = fake_obs(columns);
        let gains = pilot_tap_gains(&obs, &cascade, &[tap_delay], 0).unwrap();
        for (l, row) in gains.iter().enumerate() {
            let want = Complex64::from_polar(1.0, 0.12 * l as f64);
            // Wiener regularization costs a couple percent of amplitude
            assert!((row[0] - want).norm() < 0.1, "pilot {l}: {}", row[0]);
            assert!((row[0].arg() - want.arg()).abs() < 0.02, "pilot {l} phase");
        }
    }

    #[test]
    fn two_taps_resolve_independently() {
        let window = 128;
        let cascade = sharp_cascade(6);
        let g0 = Complex64::new(0.9, -0.2);
        let g1 = Complex64::new(-0.3, 0.6);
        let columns: Vec<Vec<Complex64>> = (0..8)
            .map(|_| {
                let mut col = vec![Complex64::new(0.0, 0.0); window];
                for (d, g) in [(0i64, g0), (30, g1)] {
                    let center = d + (window / 2) as i64;
                    for (i, &e) in cascade.iter().enumerate() {
                        let idx = center - 6 + i as i64;
                        col[idx as usize] += g * e;
                    }
                }
                col
            })
            .collect();
        let obs = fake_obs(columns);
        let gains = pilot_tap_gains(&obs, &cascade, &[0, 30], 2).unwrap();
        assert!((gains[4][0] - g0).norm() < 0.1 * g0.norm());
        assert!((gains[4][1] - g1).norm() < 0.1 * g1.norm());
    }

    #[test]
    fn smoothing_averages_noise() {
        let window = 64;
        let cascade = vec![Complex64::new(1.0, 0.0)];
        let n_pilots = 40;
        let mut rng = crate::rng::rng_from(3);
        let columns: Vec<Vec<Complex64>> = (0..n_pilots)
            .map(|_| {
                let mut col = vec![Complex64::new(0.0, 0.0); window];
                col[window / 2] =
                    Complex64::new(1.0, 0.0) + crate::rng::complex_gaussian(&mut rng) * 0.5;
                col
            })
            .collect();
        let obs = fake_obs(columns);
        let rough = pilot_tap_gains(&obs, &cascade, &[0], 0).unwrap();
        let smooth = pilot_tap_gains(&obs, &cascade, &[0], 8).unwrap();
        let spread = |g: &[Vec<Complex64>]| -> f64 {
            let mean: Complex64 = g.iter().map(|r| r[0]).sum::<Complex64>() / g.len() as f64;
            g.iter().map(|r| (r[0] - mean).norm_sqr()).sum::<f64>() / g.len() as f64
        };
        assert!(spread(&smooth) < 0.3 * spread(&rough));
    }
}
