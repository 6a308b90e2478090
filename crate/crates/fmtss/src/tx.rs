//! Waveform synthesis.
//!
//! [`modulate_direct`] is the reference path: per-branch upsampling and
//! time-domain convolution with the modulated prototype. [`modulate_fc`]
//! produces the same samples with an overlap-save fast-convolution block
//! structure: per-block symbol-rate FFTs, spectral filtering and placement
//! at the subcarrier bins, and one large inverse FFT per block.
//!
//! Both return the full convolution: output sample `i` corresponds to the
//! signal at full-rate time `i - L_p`, where `L_p` is the prototype
//! half-length, and symbol `n` is centered at time `n * L`.

use crate::config::WaveformConfig;
use crate::error::{Error, Result};
use crate::fft::{fft_inplace, ifft_inplace};
use crate::filter::PrototypeFilter;
use crate::framing::PacketFrame;
use crate::plan::SubcarrierPlan;
use crate::stream::SampleStream;
use num_complex::Complex64;
use std::f64::consts::TAU;

fn check_plan_matches(plan: &SubcarrierPlan, cfg: &WaveformConfig) -> Result<()> {
    if plan.subcarriers != cfg.subcarriers
        || plan.expansion != cfg.expansion
        || (plan.symbol_rate - cfg.symbol_rate).abs() > 1e-9
    {
        return Err(Error::InvalidConfig(
            "plan geometry does not match the waveform configuration".into(),
        ));
    }
    Ok(())
}

/// Modulated prototype kernel for each subcarrier branch,
/// `w_k[r] = gain_k * p[r] * exp(j 2 pi (f_k/f_s) r)` for `r` in `[-L_p, L_p]`.
pub(crate) fn branch_kernels(
    plan: &SubcarrierPlan,
    proto: &PrototypeFilter,
    cfg: &WaveformConfig,
) -> Vec<Vec<Complex64>> {
    let half = proto.half_full as i64;
    let fs = cfg.sample_rate();
    plan.frequencies()
        .iter()
        .enumerate()
        .map(|(k, &fk)| {
            let gain = plan.gains[k];
            let step = TAU * fk / fs;
            (-half..=half)
                .map(|r| {
                    let phase = step * r as f64;
                    gain * proto.taps_full[(r + half) as usize]
                        * Complex64::new(phase.cos(), phase.sin())
                })
                .collect()
        })
        .collect()
}

fn symbol_matrix(frame: &PacketFrame, subcarriers: usize) -> Vec<Vec<Complex64>> {
    (0..frame.total_symbols()).map(|n| frame.column(n, subcarriers)).collect()
}

/// Reference synthesis by direct convolution along each subcarrier branch.
pub fn modulate_direct(
    frame: &PacketFrame,
    plan: &SubcarrierPlan,
    proto: &PrototypeFilter,
    cfg: &WaveformConfig,
) -> Result<SampleStream> {
    cfg.validate()?;
    check_plan_matches(plan, cfg)?;
    let kernels = branch_kernels(plan, proto, cfg);
    let columns = symbol_matrix(frame, cfg.subcarriers);
    let l = cfg.samples_per_symbol();
    let half = proto.half_full;
    let n_sym = columns.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n_sym * l + 2 * half];

    for (n, col) in columns.iter().enumerate() {
        let base = n * l; // output index of kernel start for symbol n
        for (k, &s) in col.iter().enumerate() {
            if s == Complex64::new(0.0, 0.0) {
                continue;
            }
            let w = &kernels[k];
            for (r, &wv) in w.iter().enumerate() {
                out[base + r] += s * wv;
            }
        }
    }
    Ok(SampleStream::new(out, cfg.sample_rate()))
}

/// Fast-convolution synthesis (overlap-save), sample-exact with respect to
/// [`modulate_direct`] up to floating-point rounding.
pub fn modulate_fc(
    frame: &PacketFrame,
    plan: &SubcarrierPlan,
    proto: &PrototypeFilter,
    cfg: &WaveformConfig,
) -> Result<SampleStream> {
    cfg.validate()?;
    check_plan_matches(plan, cfg)?;

    let l = cfg.samples_per_symbol();
    let n_s = cfg.block_symbols;
    let n = cfg.fc_block_len();
    let half = proto.half_full; // L_p
    let span_symbols = cfg.filter_half_span; // kernel span in symbols
    debug_assert_eq!((2 * half) % l, 0);
    if span_symbols > n_s / 2 {
        return Err(Error::InvalidConfig("filter span exceeds half the FC block".into()));
    }

    // Frequency response of each branch kernel across all N bins. Keeping
    // the full band (not just the subcarrier passband) is what makes the
    // block output agree with direct convolution to rounding error.
    let kernels = branch_kernels(plan, proto, cfg);
    let branch_spectra: Vec<Vec<Complex64>> = kernels
        .iter()
        .map(|w| {
            let mut buf = vec![Complex64::new(0.0, 0.0); n];
            let half_i = half as i64;
            for (i, &wv) in w.iter().enumerate() {
                let r = i as i64 - half_i;
                buf[r.rem_euclid(n as i64) as usize] = wv;
            }
            fft_inplace(&mut buf);
            buf
        })
        .collect();

    let columns = symbol_matrix(frame, cfg.subcarriers);
    let n_sym = columns.len();
    let out_len = n_sym * l + 2 * half;
    let mut out = vec![Complex64::new(0.0, 0.0); out_len];

    let advance = n - 2 * half; // valid samples per block
    let advance_symbols = n_s - span_symbols;
    let first_symbol_offset = -((2 * half / l) as i64); // block 0 input start, in symbols

    let mut sym_fft = vec![Complex64::new(0.0, 0.0); n_s];
    let mut acc = vec![Complex64::new(0.0, 0.0); n];

    let mut block = 0usize;
    loop {
        let out_start = block as i64 * advance as i64; // index into `out`
        if out_start >= out_len as i64 {
            break;
        }
        let sym_start = first_symbol_offset + (block * advance_symbols) as i64;

        acc.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for k in 0..cfg.subcarriers {
            let mut any = false;
            for (j, slot) in sym_fft.iter_mut().enumerate() {
                let sym = sym_start + j as i64;
                *slot = if sym >= 0 && (sym as usize) < n_sym {
                    let v = columns[sym as usize][k];
                    if v != Complex64::new(0.0, 0.0) {
                        any = true;
                    }
                    v
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
            if !any {
                continue;
            }
            fft_inplace(&mut sym_fft);
            let spectrum = &branch_spectra[k];
            for (q, a) in acc.iter_mut().enumerate() {
                *a += sym_fft[q % n_s] * spectrum[q];
            }
        }

        ifft_inplace(&mut acc);
        let scale = 1.0 / n as f64;
        for j in 0..advance {
            let oi = out_start + j as i64;
            if oi >= 0 && (oi as usize) < out_len {
                out[oi as usize] = acc[half + j] * scale;
            }
        }
        block += 1;
    }

    Ok(SampleStream::new(out, cfg.sample_rate()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fft::max_abs;
    use crate::filter::build_prototype;
    use crate::framing::{build_alphabet, encode, FrameLayout};
    use crate::plan::{build_contiguous_plan, place_subcarriers, Placement};
    use crate::rng::rng_from;
    use rand::Rng;

    fn random_bits(n: usize, seed: u64) -> Vec<u8> {
        let mut rng = rng_from(seed);
        (0..n).map(|_| rng.gen_range(0..2u8)).collect()
    }

    fn cfg(k: usize, u: usize, block: usize) -> WaveformConfig {
        WaveformConfig {
            subcarriers: k,
            expansion: u,
            alphabet_size: k.min(4),
            block_symbols: block,
            ..WaveformConfig::default()
        }
    }

    #[test]
    fn single_branch_impulse_reproduces_prototype() {
        let c = cfg(1, 1, 16);
        let proto = build_prototype(&c).unwrap();
        let plan = build_contiguous_plan(&c).unwrap();
        let alphabet = build_alphabet(1, 1).unwrap();
        let frame = PacketFrame {
            preamble_symbols: vec![],
            payload: vec![alphabet.columns[0].clone()],
            symbol_indices: vec![0],
            bits: vec![],
            layout: FrameLayout::new(1, 4, 16, 0),
        };
        let x = modulate_direct(&frame, &plan, &proto, &c).unwrap();
        for (i, &p) in proto.taps_full.iter().enumerate() {
            assert!((x.samples[i] - Complex64::new(p, 0.0)).norm() < 1e-12);
        }
        for i in proto.taps_full.len()..x.len() {
            assert!(x.samples[i].norm() < 1e-12);
        }
    }

    #[test]
    fn zero_symbols_give_zero_output() {
        let c = cfg(8, 2, 16);
        let proto = build_prototype(&c).unwrap();
        let plan = place_subcarriers(&c, Placement::SegmentedRandom, 1).unwrap();
        let alphabet = build_alphabet(8, 4).unwrap();
        let mut frame = encode(&random_bits(32, 0), &alphabet, 8, 2, 4).unwrap();
        for col in &mut frame.payload {
            col.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        }
        frame.preamble_symbols.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for path in [modulate_direct, modulate_fc] {
            let x = path(&frame, &plan, &proto, &c).unwrap();
            assert!(max_abs(&x.samples) == 0.0);
        }
    }

    #[test]
    fn fc_matches_direct_small() {
        for &(k, u, seed) in &[(8usize, 1usize, 3u64), (8, 2, 4), (8, 4, 5), (4, 8, 6)] {
            let c = cfg(k, u, 16);
            let proto = build_prototype(&c).unwrap();
            let plan = place_subcarriers(&c, Placement::SegmentedRandom, seed).unwrap();
            let alphabet = build_alphabet(k, c.alphabet_size).unwrap();
            let frame = encode(&random_bits(60, seed), &alphabet, 5, 2, 4).unwrap();
            let a = modulate_direct(&frame, &plan, &proto, &c).unwrap();
            let b = modulate_fc(&frame, &plan, &proto, &c).unwrap();
            assert_eq!(a.len(), b.len());
            let peak = max_abs(&a.samples);
            let err = a
                .samples
                .iter()
                .zip(b.samples.iter())
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            assert!(err <= 1e-9 * peak, "K={k} u={u}: err {err} peak {peak}");
        }
    }

    #[test]
    fn fc_block_boundaries_are_seamless() {
        let c = cfg(8, 2, 16);
        let proto = build_prototype(&c).unwrap();
        let plan = place_subcarriers(&c, Placement::Random, 9).unwrap();
        let alphabet = build_alphabet(8, 4).unwrap();
        // long enough for several blocks
        let frame = encode(&random_bits(200, 1), &alphabet, 5, 2, 4).unwrap();
        let a = modulate_direct(&frame, &plan, &proto, &c).unwrap();
        let b = modulate_fc(&frame, &plan, &proto, &c).unwrap();
        let advance = c.fc_block_len() - 2 * proto.half_full;
        let peak = max_abs(&a.samples);
        let mut boundary = advance;
        while boundary + 2 < a.len() {
            for i in boundary - 2..=boundary + 2 {
                let err = (a.samples[i] - b.samples[i]).norm();
                assert!(err <= 1e-9 * peak, "boundary sample {i}: {err}");
            }
            boundary += advance;
        }
    }

    #[test]
    fn modulation_is_linear_in_the_symbols() {
        let c = cfg(8, 2, 16);
        let proto = build_prototype(&c).unwrap();
        let plan = place_subcarriers(&c, Placement::SegmentedRandom, 2).unwrap();
        let alphabet = build_alphabet(8, 4).unwrap();
        let f1 = encode(&random_bits(48, 10), &alphabet, 5, 2, 4).unwrap();
        let mut f2 = f1.clone();
        let scale = Complex64::new(0.5, -1.25);
        for col in &mut f2.payload {
            col.iter_mut().for_each(|v| *v *= scale);
        }
        f2.preamble_symbols.iter_mut().for_each(|v| *v *= scale);
        let x1 = modulate_direct(&f1, &plan, &proto, &c).unwrap();
        let x2 = modulate_direct(&f2, &plan, &proto, &c).unwrap();
        for (a, b) in x1.samples.iter().zip(x2.samples.iter()) {
            assert!((a * scale - b).norm() < 1e-9);
        }
    }
}
