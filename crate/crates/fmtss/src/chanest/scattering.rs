//! Scattering function and intermediate power-delay profile.
//!
//! Each pilot window is returned to the noncontiguous delay domain with
//! the adjoint remap; the per-delay time series across pilots is then
//! transformed to Doppler and squared, giving the delay-Doppler power
//! distribution. A Doppler-weighted row sum produces the intermediate PDP,
//! which models as the true PDP convolved with the squared matched
//! response.

use crate::chanest::pilots::PilotObservation;
use crate::error::{Error, Result};
use crate::fft::fft_inplace;
use crate::rx::remap::RemapOperator;
use num_complex::Complex64;

/// Delay-Doppler power matrix: `s[delay][doppler]`.
pub fn scattering_function(
    obs: &PilotObservation,
    op: &RemapOperator,
) -> Result<Vec<Vec<f64>>> {
    let n_pilots = obs.columns.len();
    if n_pilots < 2 {
        return Err(Error::InvalidConfig("need at least two pilots for a Doppler axis".into()));
    }
    if op.output_len != obs.window_len {
        return Err(Error::LengthMismatch { expected: obs.window_len, got: op.output_len });
    }
    let m = op.input_len;
    // adjoint remap of every pilot window
    let mut delay_time = vec![vec![Complex64::new(0.0, 0.0); n_pilots]; m];
    for (l, col) in obs.columns.iter().enumerate() {
        let full = op.adjoint(col)?;
        for (d, v) in full.iter().enumerate() {
            delay_time[d][l] = *v;
        }
    }
    // Doppler transform along the pilot axis
    let mut out = vec![vec![0.0f64; n_pilots]; m];
    let mut buf = vec![Complex64::new(0.0, 0.0); n_pilots];
    for (d, row) in delay_time.iter().enumerate() {
        buf.copy_from_slice(row);
        fft_inplace(&mut buf);
        for (nu, v) in buf.iter().enumerate() {
            out[d][nu] = v.norm_sqr();
        }
    }
    Ok(out)
}

/// Doppler frequency of each bin for a pilot spacing in seconds.
pub fn doppler_axis(n_pilots: usize, pilot_spacing: f64) -> Vec<f64> {
    let span = 1.0 / pilot_spacing;
    (0..n_pilots)
        .map(|nu| {
            let mut f = nu as f64 * span / n_pilots as f64;
            if f >= span / 2.0 {
                f -= span;
            }
            f
        })
        .collect()
}

/// Gaussian Doppler weights with the given two-sigma width in Hz.
pub fn gaussian_doppler_weights(n_pilots: usize, pilot_spacing: f64, two_sigma: f64) -> Vec<f64> {
    let sigma = (two_sigma / 2.0).max(1e-12);
    doppler_axis(n_pilots, pilot_spacing)
        .iter()
        .map(|&f| (-f * f / (2.0 * sigma * sigma)).exp())
        .collect()
}

/// Weighted row sum of the scattering function.
pub fn intermediate_pdp(s_eta: &[Vec<f64>], doppler_weights: &[f64]) -> Result<Vec<f64>> {
    let Some(first) = s_eta.first() else {
        return Ok(Vec::new());
    };
    if first.len() != doppler_weights.len() {
        return Err(Error::LengthMismatch { expected: first.len(), got: doppler_weights.len() });
    }
    Ok(s_eta
        .iter()
        .map(|row| row.iter().zip(doppler_weights.iter()).map(|(p, w)| p * w).sum())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::WaveformConfig;
    use crate::plan::{place_subcarriers, Placement};
    use crate::rng::{complex_gaussian, rng_from};
    use crate::rx::remap::build_remap;
    use std::f64::consts::TAU;

    fn fake_obs(columns: Vec<Vec<Complex64>>, spacing: f64) -> PilotObservation {
        let window_len = columns[0].len();
        PilotObservation {
            columns,
            window_len,
            window_start: -((window_len / 2) as i64),
            pilot_spacing: spacing,
        }
    }

    fn test_op(window_len: usize) -> RemapOperator {
        let cfg = WaveformConfig {
            subcarriers: 4,
            expansion: 2,
            alphabet_size: 4,
            filter_half_span: 4,
            block_symbols: 16,
            ..WaveformConfig::default()
        };
        let plan = place_subcarriers(&cfg, Placement::SegmentedRandom, 3).unwrap();
        build_remap(&plan, window_len * 2).unwrap()
    }

    #[test]
    fn static_channel_concentrates_at_zero_doppler() {
        let window = 48;
        let op = test_op(window);
        let mut rng = rng_from(1);
        let shape: Vec<Complex64> = (0..window).map(|_| complex_gaussian(&mut rng)).collect();
        let n_pilots = 16;
        let obs = fake_obs(vec![shape; n_pilots], 4e-3);
        let s = scattering_function(&obs, &op).unwrap();
        let dc: f64 = s.iter().map(|row| row[0]).sum();
        let total: f64 = s.iter().map(|row| row.iter().sum::<f64>()).sum();
        assert!(dc > 0.99 * total, "dc fraction {}", dc / total);
    }

    #[test]
    fn pure_doppler_tone_lands_on_the_right_bin() {
        let window = 48;
        let op = test_op(window);
        let n_pilots = 32;
        let spacing = 4e-3;
        let doppler = 3.0 / (n_pilots as f64 * spacing); // exactly bin 3
        let mut rng = rng_from(2);
        let shape: Vec<Complex64> = (0..window).map(|_| complex_gaussian(&mut rng)).collect();
        let columns: Vec<Vec<Complex64>> = (0..n_pilots)
            .map(|l| {
                let rot = Complex64::from_polar(1.0, TAU * doppler * l as f64 * spacing);
                shape.iter().map(|v| v * rot).collect()
            })
            .collect();
        let obs = fake_obs(columns, spacing);
        let s = scattering_function(&obs, &op).unwrap();
        let per_bin: Vec<f64> =
            (0..n_pilots).map(|nu| s.iter().map(|row| row[nu]).sum()).collect();
        let best = per_bin
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(best, 3);
    }

    #[test]
    fn zero_observation_gives_zero_matrix() {
        let window = 48;
        let op = test_op(window);
        let obs = fake_obs(vec![vec![Complex64::new(0.0, 0.0); window]; 4], 4e-3);
        let s = scattering_function(&obs, &op).unwrap();
        assert!(s.iter().all(|row| row.iter().all(|&v| v == 0.0)));
        let pdp = intermediate_pdp(&s, &vec![1.0; 4]).unwrap();
        assert!(pdp.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn weights_shape_matters() {
        let s = vec![vec![1.0, 2.0, 3.0]];
        assert!(intermediate_pdp(&s, &[1.0, 1.0]).is_err());
        let w = gaussian_doppler_weights(8, 4e-3, 2.0);
        assert_eq!(w.len(), 8);
        assert!((w[0] - 1.0).abs() < 1e-12);
        assert!(w[4] < w[1]); // band edge below near-DC
    }
}
