//! Subcarrier remapping operator.
//!
//! The remap takes a length-M vector to length M' = M/u by transforming to
//! the frequency domain, keeping only the bins covering the planned
//! subcarrier passbands, and inverse-transforming at the reduced size. Each
//! subcarrier band lands on its contiguous target position, so downstream
//! processing runs at the contiguous rate f_s/u. Both transforms are
//! unitary, which leaves in-band content amplified by sqrt(u).

use crate::error::{Error, Result};
use crate::fft::{fft_inplace, ifft_inplace};
use crate::plan::SubcarrierPlan;
use num_complex::Complex64;

/// Frequency-bin selection implementing the remap and its adjoint.
#[derive(Debug, Clone)]
pub struct RemapOperator {
    /// Input transform size M.
    pub input_len: usize,
    /// Output size M' = M/u.
    pub output_len: usize,
    pub expansion: usize,
    /// `retained_bins[q']` is the input bin feeding output bin `q'`.
    /// Ordered by the contiguous target position of each subcarrier.
    pub retained_bins: Vec<usize>,
    /// The contiguous plan the subcarriers map onto.
    pub contiguous_plan: SubcarrierPlan,
}

/// Build the remap for a plan and an input transform size `M`.
///
/// `M` must be divisible by `2*K*u` so subcarrier band edges align with
/// bin boundaries.
pub fn build_remap(plan: &SubcarrierPlan, input_len: usize) -> Result<RemapOperator> {
    plan.validate()?;
    let k = plan.subcarriers;
    let u = plan.expansion;
    let m = input_len;
    if m == 0 || m % (2 * k * u) != 0 {
        return Err(Error::InvalidConfig(format!(
            "transform size {m} must be a positive multiple of 2*K*u = {}",
            2 * k * u
        )));
    }
    let m_out = m / u;
    let band_bins = m / (k * u); // bins per subcarrier band (even)
    let half_band = band_bins / 2;
    let cfg = plan.config();
    let fs = cfg.sample_rate();
    let bin_hz = fs / m as f64;

    let mut retained = vec![0usize; m_out];
    for (order, &fk) in plan.frequencies().iter().enumerate() {
        let center_in = (fk / bin_hz).round() as i64;
        // contiguous target center for the subcarrier in ascending order
        let f_target = (2.0 * order as f64 - k as f64 + 1.0) * plan.symbol_rate;
        let center_out = (f_target / bin_hz).round() as i64;
        for d in -(half_band as i64)..half_band as i64 {
            let q_in = (center_in + d).rem_euclid(m as i64) as usize;
            let q_out = (center_out + d).rem_euclid(m_out as i64) as usize;
            retained[q_out] = q_in;
        }
    }

    Ok(RemapOperator {
        input_len: m,
        output_len: m_out,
        expansion: u,
        retained_bins: retained,
        contiguous_plan: plan.contiguous_equivalent(),
    })
}

impl RemapOperator {
    /// Forward remap of a length-M vector to length M'.
    pub fn forward(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.input_len {
            return Err(Error::LengthMismatch { expected: self.input_len, got: x.len() });
        }
        let mut spec = x.to_vec();
        fft_inplace(&mut spec);
        let mut out: Vec<Complex64> =
            self.retained_bins.iter().map(|&q| spec[q]).collect();
        ifft_inplace(&mut out);
        let scale = 1.0 / ((self.input_len as f64).sqrt() * (self.output_len as f64).sqrt());
        for v in &mut out {
            *v *= scale;
        }
        Ok(out)
    }

    /// Adjoint: scatter a length-M' vector back to the noncontiguous bins.
    pub fn adjoint(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        if y.len() != self.output_len {
            return Err(Error::LengthMismatch { expected: self.output_len, got: y.len() });
        }
        let mut spec = y.to_vec();
        fft_inplace(&mut spec);
        let mut full = vec![Complex64::new(0.0, 0.0); self.input_len];
        for (q_out, &q_in) in self.retained_bins.iter().enumerate() {
            full[q_in] = spec[q_out];
        }
        ifft_inplace(&mut full);
        let scale = 1.0 / ((self.input_len as f64).sqrt() * (self.output_len as f64).sqrt());
        for v in &mut full {
            *v *= scale;
        }
        Ok(full)
    }
}

/// Remap a channel impulse response: h' = R h.
pub fn remap_channel(h: &[Complex64], op: &RemapOperator) -> Result<Vec<Complex64>> {
    op.forward(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::WaveformConfig;
    use crate::fft::energy;
    use crate::plan::{place_subcarriers, Placement};
    use crate::rng::{complex_gaussian, rng_from};
    use std::f64::consts::TAU;

    fn cfg(k: usize, u: usize) -> WaveformConfig {
        WaveformConfig {
            subcarriers: k,
            expansion: u,
            alphabet_size: k.min(4),
            ..WaveformConfig::default()
        }
    }

    #[test]
    fn unit_expansion_is_identity() {
        let c = cfg(8, 1);
        let plan = place_subcarriers(&c, Placement::Random, 1).unwrap();
        let op = build_remap(&plan, 64).unwrap();
        assert_eq!(op.retained_bins, (0..64).collect::<Vec<_>>());
        let mut rng = rng_from(2);
        let x: Vec<Complex64> = (0..64).map(|_| complex_gaussian(&mut rng)).collect();
        let y = op.forward(&x).unwrap();
        for (a, b) in x.iter().zip(y.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn pure_tone_moves_to_contiguous_position_scaled_sqrt_u() {
        let c = cfg(8, 4);
        let plan = place_subcarriers(&c, Placement::SegmentedRandom, 3).unwrap();
        let m = 2 * 8 * 4 * 8; // 8 symbols worth
        let op = build_remap(&plan, m).unwrap();
        let fs = c.sample_rate();
        let fps = c.contiguous_rate();
        for (order, &fk) in plan.frequencies().iter().enumerate() {
            let x: Vec<Complex64> =
                (0..m).map(|i| Complex64::from_polar(1.0, TAU * fk / fs * i as f64)).collect();
            let y = op.forward(&x).unwrap();
            let f_target = op.contiguous_plan.frequencies()[order];
            let expected_gain = (c.expansion as f64).sqrt();
            for (i, v) in y.iter().enumerate() {
                let want = Complex64::from_polar(expected_gain, TAU * f_target / fps * i as f64);
                assert!((v - want).norm() < 1e-9, "subcarrier {order} sample {i}");
            }
        }
    }

    #[test]
    fn forward_adjoint_identity_on_reduced_space() {
        let c = cfg(8, 2);
        let plan = place_subcarriers(&c, Placement::Random, 7).unwrap();
        let op = build_remap(&plan, 128).unwrap();
        let mut rng = rng_from(4);
        let v: Vec<Complex64> = (0..op.output_len).map(|_| complex_gaussian(&mut rng)).collect();
        let round = op.forward(&op.adjoint(&v).unwrap()).unwrap();
        let err: f64 = v.iter().zip(round.iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
        assert!(err.sqrt() < 1e-9 * energy(&v).sqrt());
    }

    #[test]
    fn adjoint_roundtrip_is_inband_projection() {
        let c = cfg(4, 2);
        let plan = place_subcarriers(&c, Placement::SegmentedRandom, 5).unwrap();
        let m = 2 * 4 * 2 * 4;
        let op = build_remap(&plan, m).unwrap();
        let mut rng = rng_from(6);
        let h: Vec<Complex64> = (0..m).map(|_| complex_gaussian(&mut rng)).collect();
        let projected = op.adjoint(&op.forward(&h).unwrap()).unwrap();
        // compare against explicit spectral projection onto retained bins
        let mut spec = h.clone();
        fft_inplace(&mut spec);
        let keep: std::collections::HashSet<usize> = op.retained_bins.iter().copied().collect();
        for (q, v) in spec.iter_mut().enumerate() {
            if !keep.contains(&q) {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        ifft_inplace(&mut spec);
        for v in &mut spec {
            *v /= m as f64;
        }
        for (a, b) in projected.iter().zip(spec.iter()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn inband_energy_preserved() {
        let c = cfg(8, 4);
        let plan = place_subcarriers(&c, Placement::Uniform, 0).unwrap();
        let m = 2 * 8 * 4 * 4;
        let op = build_remap(&plan, m).unwrap();
        // synthesize strictly in-band content: random coefficients on the
        // retained bins only
        let mut rng = rng_from(9);
        let mut spec = vec![Complex64::new(0.0, 0.0); m];
        for &q in &op.retained_bins {
            spec[q] = complex_gaussian(&mut rng);
        }
        let mut x = spec.clone();
        ifft_inplace(&mut x);
        for v in &mut x {
            *v /= (m as f64).sqrt(); // unitary inverse
        }
        let y = op.forward(&x).unwrap();
        let ratio = energy(&y) / energy(&x);
        assert!((ratio - 1.0).abs() < 1e-9, "energy ratio {ratio}");
    }

    #[test]
    fn single_tap_spreads_but_stays_local() {
        // a unit tap remapped at u=8 concentrates most of its energy
        // within +/-3 symbol intervals of the scaled tap position
        let c = cfg(32, 8);
        let plan = place_subcarriers(&c, Placement::SegmentedRandom, 11).unwrap();
        let m = 2 * 32 * 8 * 16;
        let op = build_remap(&plan, m).unwrap();
        let mut h = vec![Complex64::new(0.0, 0.0); m];
        let tap_pos = 2048; // full-rate sample
        h[tap_pos] = Complex64::new(1.0, 0.0);
        let hp = op.forward(&h).unwrap();
        let center = tap_pos / 8;
        let lp = 3 * c.samples_per_symbol_contiguous();
        let total = energy(&hp);
        let mut local = 0.0;
        for (i, v) in hp.iter().enumerate() {
            let d = (i as i64 - center as i64).abs() as usize;
            if d <= lp {
                local += v.norm_sqr();
            }
        }
        assert!(local > 0.9 * total, "local fraction {}", local / total);
    }

    #[test]
    fn rejects_misaligned_transform_size() {
        let c = cfg(8, 2);
        let plan = place_subcarriers(&c, Placement::Random, 1).unwrap();
        assert!(build_remap(&plan, 100).is_err());
    }
}
