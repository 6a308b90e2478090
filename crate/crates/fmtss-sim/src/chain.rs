//! Packet-level simulation chain shared by the experiments.

use fmtss::chanest::mmse::{estimator_ring_len, MmseInputs, PriorScale};
use fmtss::chanest::scattering::gaussian_doppler_weights;
use fmtss::chanest::{
    collect_pilots, fill_support_gaps, intermediate_pdp, matched_power_kernel, mmse_estimate,
    pilot_tap_gains, recovery_check, scattering_function, smooth_pdp, solve_pdp_bpdn_decimated,
    trim_support_mass, BpdnParams,
};
use fmtss::channel::{apply_channel, ChannelRealization};
use fmtss::channel::noise::add_noise_at_snr;
use fmtss::config::WaveformConfig;
use fmtss::filter::{build_prototype, PrototypeFilter};
use fmtss::framing::{build_alphabet, decode_symbols, encode, MulticodeAlphabet};
use fmtss::plan::SubcarrierPlan;
use fmtss::pulse::{build_pulse_bank, PulseBank};
use fmtss::rng::rng_from;
use fmtss::rx::rake::ChannelStateInfo;
use fmtss::rx::{
    build_nmf, build_remap, correlate_preamble, demod_fc, rake_detect, NmfFilter, RakeConfig,
    TimingParams,
};
use fmtss::tx::modulate_fc;
use fmtss::{Error, Result, SampleStream};
use num_complex::Complex64;
use rand::Rng;

use crate::config::CsiMode;

/// Static per-configuration state reused across packets.
pub struct Link {
    pub cfg: WaveformConfig,
    pub proto: PrototypeFilter,
    pub alphabet: MulticodeAlphabet,
    pub preamble_period: usize,
    pub preamble_periods: usize,
    pub pilot_interval: usize,
}

impl Link {
    pub fn new(
        cfg: WaveformConfig,
        preamble_period: usize,
        preamble_periods: usize,
        pilot_interval: usize,
    ) -> Result<Self> {
        cfg.validate()?;
        let proto = build_prototype(&cfg)?;
        let alphabet = build_alphabet(cfg.subcarriers, cfg.alphabet_size)?;
        Ok(Self { cfg, proto, alphabet, preamble_period, preamble_periods, pilot_interval })
    }

    pub fn random_bits(&self, count: usize, seed: u64) -> Vec<u8> {
        let mut rng = rng_from(seed);
        (0..count).map(|_| rng.gen_range(0..2u8)).collect()
    }
}

/// Channel applied to one packet.
pub enum ChannelKind<'a> {
    Identity,
    Fading(&'a ChannelRealization),
}

/// Everything variable about one packet.
pub struct PacketSpec<'a> {
    pub plan: &'a SubcarrierPlan,
    pub bits: &'a [u8],
    pub channel: ChannelKind<'a>,
    /// Passband SNR target; positive infinity disables noise.
    pub snr_db: f64,
    /// Interference stream to add after noise, if any.
    pub interference: Option<&'a SampleStream>,
    /// Per-bin noise-plus-interference profile on the NMF design grid.
    pub nmf_profile: Option<&'a [f64]>,
    /// Per-bin noise-plus-interference variance on the estimator ring.
    pub est_noise_psd: Option<&'a [f64]>,
    pub noise_seed: u64,
}

/// Per-packet, per-CSI-mode outcome.
#[derive(Debug, Clone)]
pub struct PacketOutcome {
    pub bits: usize,
    pub bit_errors: usize,
    pub ambiguity_ratio: f64,
    pub detected: bool,
    /// Normalized MSE of the channel estimate against the mid-packet
    /// snapshot, when estimation ran and the truth was available.
    pub nmse: Option<f64>,
    pub est_converged: Option<bool>,
    pub support_len: Option<usize>,
    pub recoverable: Option<bool>,
}

/// Run one packet through the chain and decode it once per CSI mode.
pub fn run_packet(
    link: &Link,
    spec: &PacketSpec<'_>,
    csi_modes: &[CsiMode],
) -> Result<Vec<PacketOutcome>> {
    let cfg = &link.cfg;
    let frame = encode(
        spec.bits,
        &link.alphabet,
        link.preamble_period,
        link.preamble_periods,
        link.pilot_interval,
    )?;
    let clean = modulate_fc(&frame, spec.plan, &link.proto, cfg)?;

    let after_channel = match &spec.channel {
        ChannelKind::Identity => clean,
        ChannelKind::Fading(chan) => apply_channel(&clean, chan)?,
    };

    let (mut received, noise_var) = if spec.snr_db.is_finite() {
        let (noisy, noise) = add_noise_at_snr(&after_channel, spec.plan, spec.snr_db, spec.noise_seed)?;
        let var = noise.mean_power();
        (noisy, var)
    } else {
        let var = 1e-9 * after_channel.mean_power().max(1e-300);
        (after_channel.clone(), var)
    };
    if let Some(intf) = spec.interference {
        received = received.add(intf)?;
    }

    let op = build_remap(spec.plan, cfg.fc_block_len())?;
    let nmf = build_nmf(spec.plan, &link.proto, cfg, spec.nmf_profile.unwrap_or(&[]))?;
    let y_prime = demod_fc(&received, &op, &nmf, cfg)?;

    // always decode; the detection flag records whether the peak cleared
    // the threshold a blind receiver would use
    let timing_params = TimingParams {
        detection_factor: 0.0,
        period_symbols: Some(link.preamble_period),
    };
    let timing = correlate_preamble(&y_prime, &frame.preamble_symbols, cfg, timing_params)?;
    let detected = timing.peak_metric >= 6.0 * timing.median_metric;

    // mid-packet truth snapshot for perfect CSI and NMSE diagnostics
    let snapshot = match &spec.channel {
        ChannelKind::Identity => None,
        ChannelKind::Fading(chan) => {
            let mid = received.len() / 2;
            Some(chan.snapshot(mid.min(received.len().saturating_sub(1))))
        }
    };

    let mut outcomes = Vec::with_capacity(csi_modes.len());
    for mode in csi_modes {
        let outcome = match mode {
            CsiMode::Perfect => {
                let (csi, updates) = match &spec.channel {
                    ChannelKind::Identity => {
                        (identity_csi(spec.plan, cfg, timing.offset)?, Vec::new())
                    }
                    ChannelKind::Fading(chan) => {
                        let (taps, first_delay) =
                            snapshot.clone().expect("fading snapshot");
                        let base =
                            perfect_csi(spec.plan, cfg, &taps, first_delay, timing.offset)?;
                        // refresh the genie CSI every few pilots
                        let mut updates = Vec::new();
                        let l_sym = cfg.samples_per_symbol_contiguous();
                        let pilot_cols = frame.layout.pilot_columns();
                        for (l, &col) in pilot_cols.iter().enumerate().step_by(6) {
                            let center_c = timing.offset
                                + (frame.layout.preamble_symbols() + col) * l_sym;
                            let sample = (center_c * cfg.expansion)
                                .min(received.len().saturating_sub(1));
                            let (t, fd) = chan.snapshot(sample);
                            let state =
                                perfect_csi(spec.plan, cfg, &t, fd, timing.offset)?;
                            let _ = l;
                            updates.push((col, state));
                        }
                        (base, updates)
                    }
                };
                let errors = detect_and_count(
                    link, spec, &frame, &y_prime, &csi, timing.offset, &nmf, &updates,
                )?;
                PacketOutcome {
                    bits: spec.bits.len(),
                    bit_errors: errors,
                    ambiguity_ratio: timing.ambiguity_ratio,
                    detected,
                    nmse: None,
                    est_converged: None,
                    support_len: None,
                    recoverable: None,
                }
            }
            CsiMode::Estimated => {
                let est = estimate_channel(
                    link, spec, &frame, &received, &y_prime, timing.offset, noise_var, &nmf,
                );
                match est {
                    Ok((csi, updates, diag)) => {
                        let errors = detect_and_count(
                            link, spec, &frame, &y_prime, &csi, timing.offset, &nmf, &updates,
                        )?;
                        PacketOutcome {
                            bits: spec.bits.len(),
                            bit_errors: errors,
                            ambiguity_ratio: timing.ambiguity_ratio,
                            detected,
                            nmse: diag.nmse_vs_snapshot(&snapshot, cfg),
                            est_converged: Some(diag.converged),
                            support_len: Some(diag.support_len),
                            recoverable: Some(diag.recoverable),
                        }
                    }
                    Err(_) => {
                        // estimation refused; decode with a bare single-tap
                        // guess so the packet still produces decisions
                        let csi = ChannelStateInfo {
                            taps: vec![Complex64::new(1.0, 0.0)],
                            start: 0,
                        };
                        let errors = detect_and_count(
                            link, spec, &frame, &y_prime, &csi, timing.offset, &nmf, &[],
                        )?;
                        PacketOutcome {
                            bits: spec.bits.len(),
                            bit_errors: errors,
                            ambiguity_ratio: timing.ambiguity_ratio,
                            detected,
                            nmse: None,
                            est_converged: Some(false),
                            support_len: None,
                            recoverable: Some(false),
                        }
                    }
                }
            }
        };
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

#[allow(clippy::too_many_arguments)]
fn detect_and_count(
    link: &Link,
    spec: &PacketSpec<'_>,
    frame: &fmtss::framing::PacketFrame,
    y_prime: &SampleStream,
    csi: &ChannelStateInfo,
    timing_offset: usize,
    nmf: &NmfFilter,
    updates: &[(usize, ChannelStateInfo)],
) -> Result<usize> {
    let out = rake_detect(
        y_prime,
        csi,
        timing_offset,
        &frame.layout,
        &link.alphabet,
        spec.plan,
        &link.proto,
        nmf,
        &link.cfg,
        RakeConfig { pilot_tracking: true },
        updates,
    )?;
    let decoded = decode_symbols(&out.indices, link.alphabet.size())?;
    Ok(decoded.iter().zip(frame.bits.iter()).filter(|(a, b)| a != b).count())
}

/// Perfect channel state information: the remap of a snapshot of the true
/// taps, windowed around the support, expressed relative to the timing
/// anchor.
///
/// The remap only commutes with delay shifts by multiples of `K*u`, so the
/// taps are remapped at their absolute delays and the anchor offset is
/// applied afterwards as a plain contiguous-domain index shift.
pub fn perfect_csi(
    plan: &SubcarrierPlan,
    cfg: &WaveformConfig,
    taps: &[Complex64],
    first_delay: usize,
    timing_offset: usize,
) -> Result<ChannelStateInfo> {
    let abs: Vec<i64> = (0..taps.len()).map(|d| (first_delay + d) as i64).collect();
    build_csi_from_taps(plan, cfg, &abs, taps, timing_offset)
}

/// CSI for an ideal channel: a unit tap at delay zero.
pub fn identity_csi(
    plan: &SubcarrierPlan,
    cfg: &WaveformConfig,
    timing_offset: usize,
) -> Result<ChannelStateInfo> {
    build_csi_from_taps(plan, cfg, &[0], &[Complex64::new(1.0, 0.0)], timing_offset)
}

fn build_csi_from_taps(
    plan: &SubcarrierPlan,
    cfg: &WaveformConfig,
    abs_delays: &[i64],
    gains: &[Complex64],
    timing_offset: usize,
) -> Result<ChannelStateInfo> {
    let u = cfg.expansion as i64;
    let l_sym_c = cfg.samples_per_symbol_contiguous() as i64;
    // contiguous shift between the timing anchor and the clean symbol grid
    let shift_c = timing_offset as i64 - cfg.filter_half_len_contiguous() as i64;
    let rel_lo = abs_delays.iter().min().unwrap().div_euclid(u) - shift_c - 4 * l_sym_c;
    let rel_hi = abs_delays.iter().max().unwrap().div_euclid(u) - shift_c + 4 * l_sym_c;

    let needed_c = (rel_hi - rel_lo + 1) as usize
        + 8 * l_sym_c as usize
        + (shift_c.unsigned_abs() as usize);
    let step = 2 * cfg.subcarriers;
    let w_c = needed_c.div_ceil(step) * step;
    let m = w_c * u as usize;
    let op = build_remap(plan, m)?;
    let mut h = vec![Complex64::new(0.0, 0.0); m];
    for (&delta, &g) in abs_delays.iter().zip(gains.iter()) {
        h[delta.rem_euclid(m as i64) as usize] += g;
    }
    let h_prime = op.forward(&h)?;
    let m_prime = h_prime.len() as i64;
    let taps = (rel_lo..=rel_hi)
        .map(|d| h_prime[(d + shift_c).rem_euclid(m_prime) as usize])
        .collect();
    Ok(ChannelStateInfo { taps, start: rel_lo })
}

/// Estimation diagnostics carried back to the experiment loop.
pub struct EstimateDiag {
    pub converged: bool,
    pub support_len: usize,
    pub recoverable: bool,
    estimate: fmtss::chanest::ChannelEstimate,
    base_minus_anchor: i64,
}

impl EstimateDiag {
    fn nmse_vs_snapshot(
        &self,
        snapshot: &Option<(Vec<Complex64>, usize)>,
        _cfg: &WaveformConfig,
    ) -> Option<f64> {
        let (taps, first) = snapshot.as_ref()?;
        let truth: Vec<(i64, Complex64)> = taps
            .iter()
            .enumerate()
            .map(|(d, &g)| (self.base_minus_anchor + (*first + d) as i64, g))
            .collect();
        Some(self.estimate.nmse_against_taps(&truth))
    }
}

/// Run the estimation chain and turn its output into detector CSI plus
/// per-pilot refreshed states.
#[allow(clippy::type_complexity)]
pub fn estimate_channel(
    link: &Link,
    spec: &PacketSpec<'_>,
    frame: &fmtss::framing::PacketFrame,
    received: &SampleStream,
    y_prime: &SampleStream,
    timing_offset: usize,
    noise_var: f64,
    nmf: &NmfFilter,
) -> Result<(ChannelStateInfo, Vec<(usize, ChannelStateInfo)>, EstimateDiag)> {
    let cfg = &link.cfg;
    let u = cfg.expansion;
    let obs = collect_pilots(y_prime, &frame.layout, timing_offset, cfg)?;
    let window_op = build_remap(spec.plan, obs.window_len * u)?;
    let s = scattering_function(&obs, &window_op)?;
    let weights = gaussian_doppler_weights(obs.columns.len(), obs.pilot_spacing, 2.0);
    let rho_eta = intermediate_pdp(&s, &weights)?;
    let bank: PulseBank = build_pulse_bank(spec.plan, &link.proto, cfg)?;
    let kernel = matched_power_kernel(&bank, cfg);
    // pursue on a grid no finer than the contiguous rate; the 22 us
    // smoothing that follows swamps the decimation
    let params = BpdnParams { max_iters: 64, ..BpdnParams::default() };
    let pdp = solve_pdp_bpdn_decimated(&rho_eta, &kernel, &params, u)?;
    let pdp = smooth_pdp(&pdp, cfg.sample_rate());
    let pdp = trim_support_mass(&pdp, 0.999);
    let pdp = fill_support_gaps(&pdp, (100e-6 * cfg.sample_rate()) as usize);
    let converged = pdp.converged;

    let m_prime = 2 * cfg.subcarriers * link.preamble_period;
    let verdict = recovery_check(pdp.support.len(), m_prime);

    let est = mmse_estimate(&MmseInputs {
        rx: received,
        timing_offset,
        preamble_period: link.preamble_period,
        plan: spec.plan,
        bank: &bank,
        cfg,
        pdp: &pdp,
        pdp_window_start: obs.window_start * u as i64,
        noise_psd: spec.est_noise_psd.unwrap_or(&[]),
        noise_variance: noise_var,
        prior_scale: PriorScale::Calibrated,
    })?;

    // window the remapped estimate around its support
    let m = estimator_ring_len(cfg, link.preamble_period) as i64;
    let signed: Vec<i64> =
        est.support.iter().map(|&r| if (r as i64) < m / 2 { r as i64 } else { r as i64 - m }).collect();
    let lo_full = signed.iter().min().copied().unwrap_or(0);
    let hi_full = signed.iter().max().copied().unwrap_or(0);
    let l_sym_c = cfg.samples_per_symbol_contiguous() as i64;
    let lo_c = lo_full.div_euclid(u as i64) - 3 * l_sym_c;
    let hi_c = hi_full.div_euclid(u as i64) + 3 * l_sym_c;
    let csi = est.csi_window(lo_c, hi_c);

    // per-pilot refresh of the tap gains over the window the pilots can see
    let eta_eff = {
        let p_c = fmtss::rx::nmf::contiguous_prototype(&link.proto, u);
        let half_c = (p_c.len() - 1) / 2;
        let c_plan = spec.plan.contiguous_equivalent();
        let rate = cfg.contiguous_rate();
        let mut pulse = vec![Complex64::new(0.0, 0.0); p_c.len()];
        for &fk in &c_plan.frequencies() {
            let step = std::f64::consts::TAU * fk / rate;
            for (i, slot) in pulse.iter_mut().enumerate() {
                let r = i as i64 - half_c as i64;
                *slot += p_c[i] * Complex64::from_polar(1.0, step * r as f64);
            }
        }
        fmtss::fft::convolve(&pulse, &nmf.taps)
    };
    // refresh what the pilot windows can see; taps outside the window
    // keep the preamble estimate (stale but better than absent)
    let margin = 16i64;
    let t_lo = lo_c.max(obs.window_start + margin);
    let t_hi = hi_c.min(obs.window_start + obs.window_len as i64 - margin - 1);
    let mut updates = Vec::new();
    if t_hi > t_lo {
        let delays: Vec<i64> = (t_lo..=t_hi).collect();
        let gains = pilot_tap_gains(&obs, &eta_eff, &delays, 18)?;
        let pilot_cols = frame.layout.pilot_columns();
        for (l, &col) in pilot_cols.iter().enumerate() {
            let mut taps = csi.taps.clone();
            for (j, &d) in delays.iter().enumerate() {
                taps[(d - lo_c) as usize] = gains[l][j];
            }
            updates.push((col, ChannelStateInfo { taps, start: lo_c }));
        }
    }

    let base = cfg.filter_half_len_full() as i64;
    let anchor_full = (timing_offset * u) as i64;
    let diag = EstimateDiag {
        converged,
        support_len: est.support.len(),
        recoverable: verdict.recoverable,
        estimate: est,
        base_minus_anchor: base - anchor_full,
    };
    Ok((csi, updates, diag))
}

/// Run `count` independent trials across `workers` threads; results come
/// back in trial order regardless of scheduling.
pub fn run_trials<T, F>(count: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    if workers <= 1 || count <= 1 {
        return (0..count).map(f).collect();
    }
    let mut slots: Vec<Option<T>> = (0..count).map(|_| None).collect();
    let chunk = count.div_ceil(workers);
    std::thread::scope(|scope| {
        for (w, slice) in slots.chunks_mut(chunk).enumerate() {
            let f = &f;
            scope.spawn(move || {
                for (i, slot) in slice.iter_mut().enumerate() {
                    *slot = Some(f(w * chunk + i));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("trial completed")).collect()
}

/// Fold a set of packet outcomes into (bits, errors).
pub fn tally(outcomes: &[PacketOutcome]) -> (u64, u64) {
    let bits: u64 = outcomes.iter().map(|o| o.bits as u64).sum();
    let errors: u64 = outcomes.iter().map(|o| o.bit_errors as u64).sum();
    (bits, errors)
}

/// Guard for experiment-level invariant checks.
pub fn ensure(cond: bool, message: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Infeasible(message.to_string()))
    }
}
