//! Pruned MMSE estimation of the channel impulse response from one
//! preamble period.
//!
//! The preamble is periodic, so one received period in steady state obeys
//! a circulant observation model that diagonalizes in the frequency
//! domain: every retained bin sees the product of the pulse-bank and
//! expanded-preamble spectra with the channel's pruned Fourier coefficients.
//! The estimator solves the regularized normal equations on the PDP
//! support, with the smoothed PDP as the prior tap covariance. Both the
//! normal matrix and the right-hand side reduce to inverse transforms of
//! per-bin weights, so the assembly is a pair of FFTs regardless of the
//! support size.

use crate::chanest::bpdn::PdpEstimate;
use crate::config::WaveformConfig;
use crate::error::{Error, Result};
use crate::fft::fft_inplace;
use crate::linalg::LeastSquares;
use crate::plan::SubcarrierPlan;
use crate::pulse::PulseBank;
use crate::rx::rake::ChannelStateInfo;
use crate::rx::remap::{build_remap, RemapOperator};
use crate::stream::SampleStream;
use num_complex::Complex64;

/// How to turn the PDP into prior tap variances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorScale {
    /// Rescale the PDP so its mass matches a least-squares channel power
    /// estimate from the same observation.
    Calibrated,
    /// Use the PDP values as variances directly.
    Raw,
}

/// Everything the estimator needs for one packet.
pub struct MmseInputs<'a> {
    /// Raw full-rate received stream.
    pub rx: &'a SampleStream,
    /// Contiguous-rate index of the first preamble symbol's center.
    pub timing_offset: usize,
    /// Preamble period length Z in symbols; the second period is measured.
    pub preamble_period: usize,
    pub plan: &'a SubcarrierPlan,
    pub bank: &'a PulseBank,
    pub cfg: &'a WaveformConfig,
    /// Smoothed PDP over the pilot-window delay axis.
    pub pdp: &'a PdpEstimate,
    /// Signed full-rate delay of PDP bin 0 relative to the timing anchor.
    pub pdp_window_start: i64,
    /// Per-bin noise variance on the length-M ring; empty means white.
    pub noise_psd: &'a [f64],
    /// White-noise variance per full-rate sample, used when `noise_psd`
    /// is empty.
    pub noise_variance: f64,
    pub prior_scale: PriorScale,
}

/// Estimated channel in both domains.
///
/// Ring index `d` of `h_hat` corresponds to the full-rate delay `d`
/// relative to the timing anchor (modulo the ring). `h_hat_prime` is the
/// remap of the taps at their absolute stream delays, since the remap
/// does not commute with sub-`K*u` shifts; [`ChannelEstimate::csi_window`]
/// applies the anchor shift in the contiguous domain where it is a plain
/// index offset.
#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    /// Impulse response on the length-M full-rate ring, zero off support.
    pub h_hat: Vec<Complex64>,
    /// Remapped absolute-delay response on the length-M' contiguous ring.
    pub h_hat_prime: Vec<Complex64>,
    /// Ring indices of the estimated taps.
    pub support: Vec<usize>,
    /// Prior variances used for the support entries.
    pub prior: Vec<f64>,
    /// Contiguous-rate offset between the timing anchor and the clean
    /// symbol grid.
    pub anchor_shift: i64,
}

impl ChannelEstimate {
    /// Ring index holding the tap at a signed full-rate delay relative to
    /// the timing anchor.
    pub fn ring_index(&self, rel_delay: i64) -> usize {
        rel_delay.rem_euclid(self.h_hat.len() as i64) as usize
    }

    /// Gather the remapped response on a linear window of signed
    /// contiguous-rate delays `[lo, hi]` relative to the timing anchor.
    pub fn csi_window(&self, lo: i64, hi: i64) -> ChannelStateInfo {
        let m_prime = self.h_hat_prime.len() as i64;
        let taps = (lo..=hi)
            .map(|d| self.h_hat_prime[(d + self.anchor_shift).rem_euclid(m_prime) as usize])
            .collect();
        ChannelStateInfo { taps, start: lo }
    }

    /// Normalized mean-squared error against a reference given as
    /// (signed full-rate delay relative to the anchor, tap) pairs.
    pub fn nmse_against_taps(&self, truth: &[(i64, Complex64)]) -> f64 {
        let mut reference = vec![Complex64::new(0.0, 0.0); self.h_hat.len()];
        for &(d, g) in truth {
            reference[self.ring_index(d)] += g;
        }
        self.nmse_against(&reference)
    }

    /// Normalized mean-squared error against a reference ring response.
    pub fn nmse_against(&self, truth: &[Complex64]) -> f64 {
        let energy: f64 = truth.iter().map(|v| v.norm_sqr()).sum();
        if energy == 0.0 {
            return f64::INFINITY;
        }
        let err: f64 = self
            .h_hat
            .iter()
            .zip(truth.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        err / energy
    }
}

fn ring_wrap(seq: &[Complex64], center: usize, n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (i, &v) in seq.iter().enumerate() {
        let r = i as i64 - center as i64;
        out[r.rem_euclid(n as i64) as usize] += v;
    }
    out
}

/// Estimate the channel impulse response and its remapped form.
pub fn mmse_estimate(inp: &MmseInputs<'_>) -> Result<ChannelEstimate> {
    let cfg = inp.cfg;
    let u = cfg.expansion;
    let k = cfg.subcarriers;
    let z = inp.preamble_period;
    let m_prime = 2 * k * z;
    let m = u * m_prime;
    let l = cfg.samples_per_symbol();

    // support on the ring
    let to_ring =
        |i: i64| -> usize { (inp.pdp_window_start + i).rem_euclid(m as i64) as usize };
    let mut support: Vec<usize> = inp.pdp.support.iter().map(|&i| to_ring(i as i64)).collect();
    support.sort_unstable();
    support.dedup();
    if support.is_empty() {
        return Err(Error::InvalidConfig("empty PDP support".into()));
    }
    if 2 * support.len() > m_prime {
        return Err(Error::RecoveryBound { support: support.len(), budget: m_prime });
    }
    let prior_raw: Vec<f64> = {
        // map each ring index back to the PDP bin to read its value
        let mut by_ring = vec![0.0f64; m];
        for &i in &inp.pdp.support {
            let ring = to_ring(i as i64);
            by_ring[ring] = by_ring[ring].max(inp.pdp.rho[i]);
        }
        support.iter().map(|&r| by_ring[r]).collect()
    };

    // one steady-state preamble period, starting a full period after the anchor
    let anchor_full = inp.timing_offset as i64 * u as i64;
    let start = anchor_full + (z * l) as i64;
    let mut y_period = vec![Complex64::new(0.0, 0.0); m];
    for (j, slot) in y_period.iter_mut().enumerate() {
        let idx = start + j as i64;
        if idx >= 0 && (idx as usize) < inp.rx.len() {
            *slot = inp.rx.samples[idx as usize];
        } else {
            return Err(Error::InvalidConfig(
                "received stream does not cover a full steady-state preamble period".into(),
            ));
        }
    }
    fft_inplace(&mut y_period);
    let y_f = y_period;

    // ring spectra of the pulse bank and the expanded preamble period
    let g_f = {
        let mut g = ring_wrap(&inp.bank.g, inp.bank.half, m);
        fft_inplace(&mut g);
        g
    };
    let z_f = {
        let symbols = crate::framing::preamble_period(z);
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for (j, &s) in symbols.iter().enumerate() {
            buf[j * l] = s;
        }
        fft_inplace(&mut buf);
        buf
    };

    // the NMF response cancels between the observation model and the noise
    // covariance, leaving pulse and preamble spectra only
    let op = build_remap(inp.plan, m)?;
    let t = support.len();

    // prior variances, optionally calibrated to a spectral power estimate
    let prior: Vec<f64> = match inp.prior_scale {
        PriorScale::Raw => {
            let peak = prior_raw.iter().cloned().fold(0.0, f64::max).max(1e-300);
            prior_raw.iter().map(|&p| p.max(1e-6 * peak)).collect()
        }
        PriorScale::Calibrated => {
            // per retained bin, |Y|^2 = |G Z|^2 |H|^2 + noise, so the
            // noise-corrected ratio averages to the channel power; skip
            // band-edge bins where the pulse spectrum rolls off
            let mut gz_floor: f64 = 0.0;
            for &q in &op.retained_bins {
                gz_floor = gz_floor.max((g_f[q] * z_f[q]).norm_sqr());
            }
            gz_floor *= 1e-2;
            let mut acc = 0.0;
            let mut count = 0usize;
            for &q in &op.retained_bins {
                let gz2 = (g_f[q] * z_f[q]).norm_sqr();
                if gz2 < gz_floor {
                    continue;
                }
                let psd = if inp.noise_psd.is_empty() {
                    inp.noise_variance
                } else {
                    inp.noise_psd[q]
                };
                acc += ((y_f[q].norm_sqr() / m as f64 - psd) / gz2 * m as f64).max(0.0);
                count += 1;
            }
            let power = if count > 0 { acc / count as f64 } else { 1.0 };
            let mass: f64 = prior_raw.iter().sum();
            let scale = if mass > 0.0 && power > 0.0 { power / mass } else { 1.0 };
            let peak = prior_raw.iter().cloned().fold(0.0, f64::max).max(1e-300);
            prior_raw
                .iter()
                .map(|&p| (p * scale).max(1e-6 * peak * scale))
                .collect()
        }
    };

    // stacked weighted least squares: data rows over the retained bins
    // plus one ridge row per prior entry; QR keeps the conditioning of
    // the direct system instead of squaring it
    let retained = &op.retained_bins;
    let mut sys = LeastSquares::new(retained.len() + t, t);
    for (r, &q) in retained.iter().enumerate() {
        let psd = if inp.noise_psd.is_empty() { inp.noise_variance } else { inp.noise_psd[q] }
            .max(1e-300);
        let w = 1.0 / (psd * m as f64).sqrt();
        let gz = g_f[q] * z_f[q] * w;
        for (j, &d) in support.iter().enumerate() {
            let ph = -std::f64::consts::TAU * (q as f64) * (d as f64) / m as f64;
            sys.set(r, j, gz * Complex64::new(ph.cos(), ph.sin()));
        }
        sys.rhs[r] = y_f[q] * w;
    }
    for (j, &p) in prior.iter().enumerate() {
        sys.set(retained.len() + j, j, Complex64::new(1.0 / p.max(1e-300).sqrt(), 0.0));
    }
    let h_p = sys.solve()?;

    let mut h_hat = vec![Complex64::new(0.0, 0.0); m];
    for (&d, &v) in support.iter().zip(h_p.iter()) {
        h_hat[d] = v;
    }
    // remap the taps at their absolute delays; the anchor offset is
    // re-applied by csi_window as a contiguous index shift
    let anchor_shift =
        inp.timing_offset as i64 - cfg.filter_half_len_contiguous() as i64;
    let shift_full = anchor_shift * u as i64;
    let mut h_abs = vec![Complex64::new(0.0, 0.0); m];
    for (&d, &v) in support.iter().zip(h_p.iter()) {
        h_abs[(d as i64 + shift_full).rem_euclid(m as i64) as usize] += v;
    }
    let h_hat_prime = op.forward(&h_abs)?;

    Ok(ChannelEstimate { h_hat, h_hat_prime, support, prior, anchor_shift })
}

/// Convenience: the remap operator size the estimator uses internally.
pub fn estimator_ring_len(cfg: &WaveformConfig, preamble_period: usize) -> usize {
    2 * cfg.subcarriers * preamble_period * cfg.expansion
}

/// Remap operator matching [`mmse_estimate`]'s ring, for callers that need
/// to move reference channels between domains.
pub fn estimator_remap(plan: &SubcarrierPlan, cfg: &WaveformConfig, z: usize) -> Result<RemapOperator> {
    build_remap(plan, estimator_ring_len(cfg, z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chanest::bpdn::PdpEstimate;
    use crate::filter::build_prototype;
    use crate::framing::{build_alphabet, encode};
    use crate::plan::{place_subcarriers, Placement};
    use crate::pulse::build_pulse_bank;
    use crate::rng::rng_from;
    use crate::rx::demod::demod_fc;
    use crate::rx::nmf::build_nmf;
    use crate::rx::remap::build_remap as rx_remap;
    use crate::rx::timing::{correlate_preamble, TimingParams};
    use crate::tx::modulate_fc;
    use rand::Rng;

    struct Setup {
        cfg: WaveformConfig,
        plan: SubcarrierPlan,
        bank: PulseBank,
        rx: SampleStream,
        timing: usize,
        z: usize,
    }

    fn chain(u: usize, z: usize, taps: &[(i64, Complex64)], seed: u64) -> Setup {
        let cfg = WaveformConfig {
            subcarriers: 8,
            expansion: u,
            alphabet_size: 4,
            filter_half_span: 4,
            block_symbols: 32,
            ..WaveformConfig::default()
        };
        let proto = build_prototype(&cfg).unwrap();
        let plan = place_subcarriers(&cfg, Placement::SegmentedRandom, seed).unwrap();
        let bank = build_pulse_bank(&plan, &proto, &cfg).unwrap();
        let alphabet = build_alphabet(8, 4).unwrap();
        let mut rng = rng_from(seed);
        let bits: Vec<u8> = (0..64).map(|_| rng.gen_range(0..2u8)).collect();
        let frame = encode(&bits, &alphabet, z, 4, 4).unwrap();
        let clean = modulate_fc(&frame, &plan, &proto, &cfg).unwrap();
        // static multipath by direct convolution
        let span = taps.iter().map(|&(d, _)| d).max().unwrap() + 1;
        let mut out = vec![Complex64::new(0.0, 0.0); clean.len() + span as usize];
        for &(d, g) in taps {
            for (i, &x) in clean.samples.iter().enumerate() {
                out[i + d as usize] += x * g;
            }
        }
        let rx = SampleStream::new(out, cfg.sample_rate());
        // timing via the standard front end
        let op = rx_remap(&plan, cfg.fc_block_len()).unwrap();
        let nmf = build_nmf(&plan, &proto, &cfg, &[]).unwrap();
        let y = demod_fc(&rx, &op, &nmf, &cfg).unwrap();
        let timing =
            correlate_preamble(&y, &frame.preamble_symbols, &cfg, TimingParams::default())
                .unwrap()
                .offset;
        Setup { cfg, plan, bank, rx, timing, z }
    }

    fn pdp_with_ring_support(m: usize, entries: &[(usize, f64)]) -> (PdpEstimate, i64) {
        // encode ring indices directly: window starts at ring 0
        let mut rho = vec![0.0f64; m];
        for &(d, v) in entries {
            rho[d] = v;
        }
        let support = entries.iter().map(|&(d, _)| d).collect();
        (PdpEstimate { rho, support, kappa_trace: vec![], converged: true }, 0)
    }

    #[test]
    fn noiseless_single_tap_is_recovered_exactly() {
        for &u in &[1usize, 2, 4] {
            let setup = chain(u, 16, &[(0, Complex64::new(0.8, -0.6))], 10 + u as u64);
            let m = estimator_ring_len(&setup.cfg, setup.z);
            let (pdp, start) = pdp_with_ring_support(m, &[(0, 1.0)]);
            let est = mmse_estimate(&MmseInputs {
                rx: &setup.rx,
                timing_offset: setup.timing,
                preamble_period: setup.z,
                plan: &setup.plan,
                bank: &setup.bank,
                cfg: &setup.cfg,
                pdp: &pdp,
                pdp_window_start: start,
                noise_psd: &[],
                noise_variance: 1e-9,
                prior_scale: PriorScale::Raw,
            })
            .unwrap();
            let got = est.h_hat[0];
            let want = Complex64::new(0.8, -0.6);
            assert!(
                (got - want).norm() < 1e-3 * want.norm(),
                "u={u}: got {got} want {want}"
            );
        }
    }

    #[test]
    fn uninformative_prior_matches_least_squares_oracle() {
        let setup = chain(
            2,
            16,
            &[(0, Complex64::new(1.0, 0.2)), (40, Complex64::new(-0.4, 0.5))],
            33,
        );
        let cfg = &setup.cfg;
        let m = estimator_ring_len(cfg, setup.z);
        // two small support blocks around the true taps
        let support: Vec<usize> = (0..4).chain(38..43).collect();
        let entries: Vec<(usize, f64)> = support.iter().map(|&d| (d, 1e9)).collect();
        let (pdp, start) = pdp_with_ring_support(m, &entries);
        let inputs = MmseInputs {
            rx: &setup.rx,
            timing_offset: setup.timing,
            preamble_period: setup.z,
            plan: &setup.plan,
            bank: &setup.bank,
            cfg,
            pdp: &pdp,
            pdp_window_start: start,
            noise_psd: &[],
            noise_variance: 1.0,
            prior_scale: PriorScale::Raw,
        };
        let est = mmse_estimate(&inputs).unwrap();

        // independent dense oracle: assemble the pruned regressor column
        // by column on the retained bins and solve the ridge-regularized
        // normal equations with naive sums
        let op = estimator_remap(&setup.plan, cfg, setup.z).unwrap();
        let l = cfg.samples_per_symbol();
        let mut g_ring = vec![Complex64::new(0.0, 0.0); m];
        for (i, &v) in setup.bank.g.iter().enumerate() {
            let r = i as i64 - setup.bank.half as i64;
            g_ring[r.rem_euclid(m as i64) as usize] += v;
        }
        let mut z_ring = vec![Complex64::new(0.0, 0.0); m];
        for (j, &s) in crate::framing::preamble_period(setup.z).iter().enumerate() {
            z_ring[j * l] = s;
        }
        let dft = |x: &[Complex64], q: usize| -> Complex64 {
            let mut acc = Complex64::new(0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let ph = -std::f64::consts::TAU * (q as f64) * (t as f64) / m as f64;
                acc += v * Complex64::new(ph.cos(), ph.sin());
            }
            acc
        };
        let start_full = setup.timing as i64 * cfg.expansion as i64 + (setup.z * l) as i64;
        let y_period: Vec<Complex64> = (0..m)
            .map(|j| setup.rx.samples[(start_full + j as i64) as usize])
            .collect();
        let t_len = support.len();
        let mut cols = vec![vec![Complex64::new(0.0, 0.0); op.retained_bins.len()]; t_len];
        let mut rhs_obs = vec![Complex64::new(0.0, 0.0); op.retained_bins.len()];
        for (row, &q) in op.retained_bins.iter().enumerate() {
            let gz = dft(&g_ring, q) * dft(&z_ring, q);
            for (j, &d) in support.iter().enumerate() {
                let ph = -std::f64::consts::TAU * (q as f64) * (d as f64) / m as f64;
                cols[j][row] = gz * Complex64::new(ph.cos(), ph.sin());
            }
            rhs_obs[row] = dft(&y_period, q);
        }
        let mut normal = HermitianMatrix::zeros(t_len);
        let mut rhs = vec![Complex64::new(0.0, 0.0); t_len];
        for i in 0..t_len {
            for j in 0..t_len {
                let mut acc = Complex64::new(0.0, 0.0);
                for row in 0..rhs_obs.len() {
                    acc += cols[i][row].conj() * cols[j][row];
                }
                if i == j {
                    acc += Complex64::new(1e-9 * m as f64, 0.0);
                }
                normal.set(i, j, acc);
            }
            for row in 0..rhs_obs.len() {
                rhs[i] += cols[i][row].conj() * rhs_obs[row];
            }
        }
        let oracle = normal.solve(&rhs).unwrap();
        for (j, &d) in support.iter().enumerate() {
            assert!(
                (est.h_hat[d] - oracle[j]).norm() < 1e-6,
                "delay {d}: {} vs oracle {}",
                est.h_hat[d],
                oracle[j]
            );
        }
        // and the oracle itself reproduces the true taps
        assert!((est.h_hat[0] - Complex64::new(1.0, 0.2)).norm() < 1e-3);
        assert!((est.h_hat[40] - Complex64::new(-0.4, 0.5)).norm() < 1e-3);
    }

    #[test]
    fn oversized_support_is_refused() {
        let setup = chain(2, 16, &[(0, Complex64::new(1.0, 0.0))], 44);
        let m = estimator_ring_len(&setup.cfg, setup.z);
        let m_prime = m / setup.cfg.expansion;
        let entries: Vec<(usize, f64)> = (0..m_prime / 2 + 1).map(|d| (d, 1.0)).collect();
        let (pdp, start) = pdp_with_ring_support(m, &entries);
        let err = mmse_estimate(&MmseInputs {
            rx: &setup.rx,
            timing_offset: setup.timing,
            preamble_period: setup.z,
            plan: &setup.plan,
            bank: &setup.bank,
            cfg: &setup.cfg,
            pdp: &pdp,
            pdp_window_start: start,
            noise_psd: &[],
            noise_variance: 1.0,
            prior_scale: PriorScale::Raw,
        });
        assert!(matches!(err, Err(Error::RecoveryBound { .. })));
    }

    #[test]
    fn remapped_estimate_is_the_absolute_delay_remap() {
        let setup = chain(2, 16, &[(3, Complex64::new(0.9, 0.1))], 55);
        let m = estimator_ring_len(&setup.cfg, setup.z);
        let (pdp, start) = pdp_with_ring_support(m, &[(3, 1.0), (2, 0.5), (4, 0.5)]);
        let est = mmse_estimate(&MmseInputs {
            rx: &setup.rx,
            timing_offset: setup.timing,
            preamble_period: setup.z,
            plan: &setup.plan,
            bank: &setup.bank,
            cfg: &setup.cfg,
            pdp: &pdp,
            pdp_window_start: start,
            noise_psd: &[],
            noise_variance: 1.0,
            prior_scale: PriorScale::Calibrated,
        })
        .unwrap();
        let op = estimator_remap(&setup.plan, &setup.cfg, setup.z).unwrap();
        // scatter h_hat at absolute delays, then remap
        let shift = est.anchor_shift * setup.cfg.expansion as i64;
        let mut h_abs = vec![Complex64::new(0.0, 0.0); m];
        for (d, &v) in est.h_hat.iter().enumerate() {
            h_abs[(d as i64 + shift).rem_euclid(m as i64) as usize] += v;
        }
        let direct = op.forward(&h_abs).unwrap();
        for (a, b) in est.h_hat_prime.iter().zip(direct.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
