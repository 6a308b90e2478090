//! The experiment suite: PAPR statistics, BER sweeps, the congested-band
//! study, estimator diagnostics, and loopback verification.

use crate::chain::{run_packet, run_trials, ChannelKind, Link, PacketOutcome, PacketSpec};
use crate::config::{CsiMode, ExperimentConfig};
use crate::report::ResultRow;
use fmtss::channel::{generate_interference, realize_channel, InterferenceSpec};
use fmtss::config::WaveformConfig;
use fmtss::framing::encode;
use fmtss::gains::{measure_papr, optimize_gains_default};
use fmtss::plan::{build_contiguous_plan, place_subcarriers, Placement, SubcarrierPlan};
use fmtss::rng::{derive_seed, rng_from};
use fmtss::rx::nmf::nmf_grid_len;
use fmtss::tx::modulate_fc;
use fmtss::SampleStream;
use rand::Rng;

fn quartiles(values: &mut [f64]) -> (f64, f64, f64) {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pick = |q: f64| values[(q * (values.len() - 1) as f64).round() as usize];
    (pick(0.25), pick(0.5), pick(0.75))
}

/// PAPR statistics per placement method and expansion factor.
pub fn run_papr_study(config: &ExperimentConfig) -> anyhow::Result<Vec<ResultRow>> {
    config.validate()?;
    let methods =
        [Placement::Uniform, Placement::SegmentedRandom, Placement::Random];
    let mut rows = Vec::new();
    for &u in config.expansions.iter().filter(|&&u| u >= 2) {
        for method in methods {
            let cfg = WaveformConfig { expansion: u, ..config.waveform };
            let link = Link::new(
                cfg,
                config.preamble_period,
                config.preamble_periods,
                config.pilot_interval,
            )?;
            let paprs: Vec<f64> = run_trials(config.papr_trials, config.workers, |trial| {
                let label = format!("papr-{method}-{u}");
                let seed = derive_seed(config.master_seed, &label, trial as u64);
                let plan = place_subcarriers(&cfg, method, seed).expect("plan");
                let plan = optimize_gains_default(&plan).expect("gains");
                let bits = link.random_bits(256, derive_seed(seed, "payload", 0));
                let frame = encode(
                    &bits,
                    &link.alphabet,
                    config.preamble_period,
                    config.preamble_periods,
                    config.pilot_interval,
                )
                .expect("frame");
                let x = modulate_fc(&frame, &plan, &link.proto, &cfg).expect("waveform");
                measure_papr(&x.samples).expect("papr")
            });
            let mut sorted = paprs.clone();
            let (q1, median, q3) = quartiles(&mut sorted);
            rows.push(ResultRow {
                experiment: "papr".into(),
                u,
                placement: method.to_string(),
                snr_db: f64::INFINITY,
                bits: config.papr_trials as u64,
                errors: 0,
                extra: vec![
                    ("q1_db".into(), format!("{q1:.4}")),
                    ("median_db".into(), format!("{median:.4}")),
                    ("q3_db".into(), format!("{q3:.4}")),
                ],
            });
        }
    }
    Ok(rows)
}

/// Median PAPR for one (method, u) cell from study rows.
pub fn papr_median(rows: &[ResultRow], method: &str, u: usize) -> Option<f64> {
    rows.iter()
        .find(|r| r.placement == method && r.u == u)
        .and_then(|r| r.extra.iter().find(|(k, _)| k == "median_db"))
        .and_then(|(_, v)| v.parse().ok())
}

fn packet_duration(config: &ExperimentConfig, cfg: &WaveformConfig) -> f64 {
    let data_symbols = config.bits_per_packet / cfg.bits_per_symbol();
    let pilots = data_symbols.div_ceil(config.pilot_interval - 1);
    let total =
        config.preamble_period * config.preamble_periods + data_symbols + pilots;
    (total as f64 + 8.0) / cfg.symbol_rate + 5e-3
}

struct CellDiag {
    ambiguity_sum: f64,
    detected: usize,
    nmse_sum: f64,
    nmse_count: usize,
    converged: usize,
    est_count: usize,
}

impl CellDiag {
    fn collect(outcomes: &[PacketOutcome]) -> Self {
        let mut d = CellDiag {
            ambiguity_sum: 0.0,
            detected: 0,
            nmse_sum: 0.0,
            nmse_count: 0,
            converged: 0,
            est_count: 0,
        };
        for o in outcomes {
            d.ambiguity_sum += o.ambiguity_ratio;
            d.detected += o.detected as usize;
            if let Some(n) = o.nmse {
                if n.is_finite() {
                    d.nmse_sum += n;
                    d.nmse_count += 1;
                }
            }
            if let Some(c) = o.est_converged {
                d.est_count += 1;
                d.converged += c as usize;
            }
        }
        d
    }

    fn extra(&self, n: usize) -> Vec<(String, String)> {
        let mut extra = vec![
            ("mean_ambiguity".into(), format!("{:.4}", self.ambiguity_sum / n as f64)),
            ("detect_rate".into(), format!("{:.4}", self.detected as f64 / n as f64)),
        ];
        if self.nmse_count > 0 {
            extra.push((
                "mean_nmse".into(),
                format!("{:.4e}", self.nmse_sum / self.nmse_count as f64),
            ));
        }
        if self.est_count > 0 {
            extra.push((
                "converged_rate".into(),
                format!("{:.4}", self.converged as f64 / self.est_count as f64),
            ));
        }
        extra
    }
}

/// BER versus SNR in the configured fading channel, one curve per
/// expansion factor and CSI mode.
pub fn run_ber_sweep(
    config: &ExperimentConfig,
    csi_modes: &[CsiMode],
) -> anyhow::Result<Vec<ResultRow>> {
    config.validate()?;
    let mut rows = Vec::new();
    for &u in &config.expansions {
        let cfg = WaveformConfig { expansion: u, ..config.waveform };
        let link = Link::new(
            cfg,
            config.preamble_period,
            config.preamble_periods,
            config.pilot_interval,
        )?;
        let chan_spec = config.channel.spec(cfg.sample_rate());
        let duration = packet_duration(config, &cfg);
        let fixed_plan = if config.redraw_plan_per_packet {
            None
        } else {
            Some(plan_for(&cfg, u, derive_seed(config.master_seed, "fixed-plan", u as u64))?)
        };

        for &snr in &config.snr_grid_db {
            let label = format!("ber-u{u}-snr{snr}");
            let per_packet: Vec<Vec<PacketOutcome>> =
                run_trials(config.packets_per_point, config.workers, |trial| {
                    let seed = derive_seed(config.master_seed, &label, trial as u64);
                    let plan = match &fixed_plan {
                        Some(p) => p.clone(),
                        None => plan_for(&cfg, u, derive_seed(seed, "plan", 0)).expect("plan"),
                    };
                    let chan = realize_channel(&chan_spec, duration, derive_seed(seed, "chan", 0))
                        .expect("channel");
                    let bits =
                        link.random_bits(config.bits_per_packet, derive_seed(seed, "bits", 0));
                    let spec = PacketSpec {
                        plan: &plan,
                        bits: &bits,
                        channel: ChannelKind::Fading(&chan),
                        snr_db: snr,
                        interference: None,
                        nmf_profile: None,
                        est_noise_psd: None,
                        noise_seed: derive_seed(seed, "noise", 0),
                    };
                    run_packet(&link, &spec, csi_modes).expect("packet")
                });
            for (mode_idx, &mode) in csi_modes.iter().enumerate() {
                let outcomes: Vec<PacketOutcome> =
                    per_packet.iter().map(|p| p[mode_idx].clone()).collect();
                let (bits, errors) = crate::chain::tally(&outcomes);
                anyhow::ensure!(errors <= bits, "bit conservation violated");
                let diag = CellDiag::collect(&outcomes);
                let mut extra = diag.extra(outcomes.len());
                extra.push((
                    "csi".into(),
                    match mode {
                        CsiMode::Perfect => "perfect".to_string(),
                        CsiMode::Estimated => "estimated".to_string(),
                    },
                ));
                rows.push(ResultRow {
                    experiment: "ber".into(),
                    u,
                    placement: if u == 1 { "contiguous".into() } else { "segmented-random".into() },
                    snr_db: snr,
                    bits,
                    errors,
                    extra,
                });
            }
        }
    }
    Ok(rows)
}

fn plan_for(cfg: &WaveformConfig, u: usize, seed: u64) -> fmtss::Result<SubcarrierPlan> {
    if u == 1 {
        build_contiguous_plan(cfg)
    } else {
        place_subcarriers(cfg, Placement::SegmentedRandom, seed)
    }
}

/// Subcarrier cells on the interference grid: superset index `i` occupies
/// cells `2i` and `2i+1` when the cell width equals the symbol rate.
fn subcarrier_cells(index: usize) -> [usize; 2] {
    [2 * index, 2 * index + 1]
}

fn occupied_cells(mask: &[bool], index: usize) -> usize {
    subcarrier_cells(index).iter().filter(|&&c| *mask.get(c).unwrap_or(&false)).count()
}

/// Choose a plan inside the congested band: a window of `K * u_sys`
/// consecutive superset positions is scanned for the most clear segments,
/// then one subcarrier per segment is drawn uniformly among clear
/// positions (best effort when a segment is fully occupied). `u_sys = 1`
/// reduces to an exhaustive center-frequency scan of the contiguous block.
pub fn avoidance_plan(
    cfg_env: &WaveformConfig,
    u_sys: usize,
    mask: &[bool],
    seed: u64,
) -> fmtss::Result<(SubcarrierPlan, usize)> {
    let k = cfg_env.subcarriers;
    let total = k * cfg_env.expansion;
    let width = k * u_sys;
    assert!(width <= total);

    let mut best_start = 0usize;
    let mut best_key = (usize::MAX, usize::MAX, usize::MAX);
    for start in 0..=total - width {
        let mut blocked_segments = 0usize;
        let mut occupied = 0usize;
        for seg in 0..k {
            let lo = start + seg * u_sys;
            let mut clear = false;
            for i in lo..lo + u_sys {
                let occ = occupied_cells(mask, i);
                occupied += occ;
                if occ == 0 {
                    clear = true;
                }
            }
            if !clear {
                blocked_segments += 1;
            }
        }
        let center_distance =
            (2 * start + width).abs_diff(total);
        let key = (blocked_segments, occupied, center_distance);
        if key < best_key {
            best_key = key;
            best_start = start;
        }
    }

    let mut rng = rng_from(seed);
    let mut indices = Vec::with_capacity(k);
    let mut overlap = 0usize;
    for seg in 0..k {
        let lo = best_start + seg * u_sys;
        let clear: Vec<usize> =
            (lo..lo + u_sys).filter(|&i| occupied_cells(mask, i) == 0).collect();
        let choice = if clear.is_empty() {
            // best effort: least-occupied position in the segment
            let min_occ =
                (lo..lo + u_sys).map(|i| occupied_cells(mask, i)).min().unwrap();
            let candidates: Vec<usize> =
                (lo..lo + u_sys).filter(|&i| occupied_cells(mask, i) == min_occ).collect();
            candidates[rng.gen_range(0..candidates.len())]
        } else {
            clear[rng.gen_range(0..clear.len())]
        };
        overlap += occupied_cells(mask, choice);
        indices.push(choice);
    }
    let placement = if u_sys == 1 { Placement::Contiguous } else { Placement::SegmentedRandom };
    let plan = SubcarrierPlan::from_superset_indices(cfg_env, indices, placement, seed)?;
    Ok((plan, overlap))
}

/// Per-bin noise-plus-interference variance over a full-rate ring of
/// length `m`, from the known white-noise level and user placements.
fn interference_psd_ring(
    m: usize,
    sample_rate: f64,
    noise_var: f64,
    spec: &InterferenceSpec,
    user_starts: &[usize],
    user_psd: f64,
) -> Vec<f64> {
    (0..m)
        .map(|q| {
            let mut f = q as f64 * sample_rate / m as f64;
            if f >= sample_rate / 2.0 {
                f -= sample_rate;
            }
            let mut v = noise_var;
            for &s in user_starts {
                let lo = -spec.band_width / 2.0 + s as f64 * spec.cell_width;
                if f >= lo && f < lo + spec.user_bandwidth {
                    v += user_psd * sample_rate;
                    break;
                }
            }
            v
        })
        .collect()
}

/// Map a full-rate PSD onto the NMF design grid at the contiguous rate.
fn nmf_profile_from_ring(
    plan: &SubcarrierPlan,
    cfg: &WaveformConfig,
    ring: &[f64],
    sample_rate: f64,
) -> Vec<f64> {
    let grid = nmf_grid_len(cfg);
    let rate_c = cfg.contiguous_rate();
    let fb = cfg.symbol_rate;
    let freqs_nc = plan.frequencies();
    let freqs_c = plan.contiguous_equivalent().frequencies();
    (0..grid)
        .map(|g| {
            let mut f = g as f64 * rate_c / grid as f64;
            if f >= rate_c / 2.0 {
                f -= rate_c;
            }
            // locate the owning contiguous band and its offset
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (k, &fc) in freqs_c.iter().enumerate() {
                let d = (f - fc).abs();
                if d < best_d {
                    best_d = d;
                    best = k;
                }
            }
            let offset = (f - freqs_c[best]).clamp(-fb, fb);
            let f_nc = freqs_nc[best] + offset;
            let q = (f_nc / sample_rate * ring.len() as f64).round() as i64;
            ring[q.rem_euclid(ring.len() as i64) as usize]
        })
        .collect()
}

/// Congested-band study: every system shares the wide environment and
/// differs only in placement freedom.
pub fn run_interference_study(config: &ExperimentConfig) -> anyhow::Result<Vec<ResultRow>> {
    config.validate()?;
    let intf_cfg = config
        .interference
        .clone()
        .ok_or_else(|| anyhow::anyhow!("interference experiment needs an interference spec"))?;
    let spec = intf_cfg.spec();
    let base = config.waveform;
    let u_env = (spec.band_width / base.signal_bandwidth()).round() as usize;
    anyhow::ensure!(u_env >= 1, "band narrower than the signal");
    let cfg_env = WaveformConfig { expansion: u_env, ..base };
    cfg_env.validate().map_err(|e| anyhow::anyhow!(e.to_string()))?;
    let link = Link::new(
        cfg_env,
        config.preamble_period,
        config.preamble_periods,
        config.pilot_interval,
    )?;
    let chan_spec = config.channel.spec(cfg_env.sample_rate());
    let duration = packet_duration(config, &cfg_env);

    let mut rows = Vec::new();
    for &u_sys in config.expansions.iter().filter(|&&u| u <= u_env) {
        for &snr in &config.snr_grid_db {
            let label = format!("intf-u{u_sys}-snr{snr}");
            let per_packet: Vec<(Vec<PacketOutcome>, usize)> =
                run_trials(config.packets_per_point, config.workers, |trial| {
                    let seed = derive_seed(config.master_seed, &label, trial as u64);
                    let chan = realize_channel(&chan_spec, duration, derive_seed(seed, "chan", 0))
                        .expect("channel");
                    let bits =
                        link.random_bits(config.bits_per_packet, derive_seed(seed, "bits", 0));

                    // occupancy draw and avoidance placement
                    let sample_len = ((duration * cfg_env.sample_rate()) as usize).next_power_of_two();
                    let probe = generate_interference(
                        &spec,
                        64,
                        cfg_env.sample_rate(),
                        1.0,
                        derive_seed(seed, "occupancy", 0),
                    )
                    .expect("occupancy");
                    let (plan, overlap) = avoidance_plan(
                        &cfg_env,
                        u_sys,
                        &probe.occupancy_mask,
                        derive_seed(seed, "placement", 0),
                    )
                    .expect("plan");

                    // synthesize through the channel to calibrate the
                    // interference against the received signal PSD
                    let frame = encode(
                        &bits,
                        &link.alphabet,
                        config.preamble_period,
                        config.preamble_periods,
                        config.pilot_interval,
                    )
                    .expect("frame");
                    let x = modulate_fc(&frame, &plan, &link.proto, &cfg_env).expect("waveform");
                    let y_chan = fmtss::channel::apply_channel(&x, &chan).expect("apply");
                    let p_pb = fmtss::channel::noise::measure_passband_power(&y_chan, &plan);
                    let signal_psd = p_pb / cfg_env.signal_bandwidth();
                    let user_psd = signal_psd * 10f64.powf(spec.power_offset_db / 10.0);
                    let intf = generate_interference(
                        &spec,
                        sample_len.max(y_chan.len() + 8),
                        cfg_env.sample_rate(),
                        signal_psd,
                        derive_seed(seed, "occupancy", 0),
                    )
                    .expect("interference");
                    let mut intf_stream = intf.stream;
                    intf_stream.samples.truncate(y_chan.len());

                    // analytic noise-plus-interference profiles
                    let noise_var = calibrated_noise_variance(&y_chan, &plan, snr);
                    let m_ring = fmtss::chanest::mmse::estimator_ring_len(
                        &cfg_env,
                        config.preamble_period,
                    );
                    let ring_psd = interference_psd_ring(
                        m_ring,
                        cfg_env.sample_rate(),
                        noise_var,
                        &spec,
                        &intf.user_starts,
                        user_psd,
                    );
                    let grid_psd =
                        nmf_profile_from_ring(&plan, &cfg_env, &ring_psd, cfg_env.sample_rate());

                    let packet = PacketSpec {
                        plan: &plan,
                        bits: &bits,
                        channel: ChannelKind::Fading(&chan),
                        snr_db: snr,
                        interference: Some(&intf_stream),
                        nmf_profile: Some(&grid_psd),
                        est_noise_psd: Some(&ring_psd),
                        noise_seed: derive_seed(seed, "noise", 0),
                    };
                    let out = run_packet(&link, &packet, &[config.csi]).expect("packet");
                    (out, overlap)
                });
            let outcomes: Vec<PacketOutcome> =
                per_packet.iter().map(|(p, _)| p[0].clone()).collect();
            let overlaps: Vec<usize> = per_packet.iter().map(|(_, o)| *o).collect();
            let (bits, errors) = crate::chain::tally(&outcomes);
            let diag = CellDiag::collect(&outcomes);
            let mut extra = diag.extra(outcomes.len());
            let mut sorted: Vec<f64> = overlaps.iter().map(|&o| o as f64).collect();
            let (_, med_overlap, _) = quartiles(&mut sorted);
            extra.push(("median_overlap_cells".into(), format!("{med_overlap}")));
            rows.push(ResultRow {
                experiment: "interference".into(),
                u: u_sys,
                placement: if u_sys == 1 { "contiguous".into() } else { "segmented-random".into() },
                snr_db: snr,
                bits,
                errors,
                extra,
            });
        }
    }
    Ok(rows)
}

/// White-noise variance the SNR calibration will inject, mirrored here so
/// the analytic PSD profiles can include it without drawing samples.
fn calibrated_noise_variance(y: &SampleStream, plan: &SubcarrierPlan, snr_db: f64) -> f64 {
    if !snr_db.is_finite() {
        return 1e-9 * y.mean_power().max(1e-300);
    }
    let p_pb = fmtss::channel::noise::measure_passband_power(y, plan);
    let pb_fraction = 1.0 / plan.expansion as f64;
    let snr_lin = 10f64.powf(snr_db / 10.0);
    p_pb / (snr_lin * pb_fraction)
}

/// Known-channel estimator diagnostics.
pub fn run_estimator_diag(config: &ExperimentConfig) -> anyhow::Result<Vec<ResultRow>> {
    config.validate()?;
    let mut rows = Vec::new();
    let scenarios: [(&str, Vec<(usize, f64)>); 2] = [
        ("single-tap", vec![(0usize, 1.0f64)]),
        ("two-mode", vec![(0, 0.7071), (2, 0.7071)]),
    ];
    for &u in &config.expansions {
        let cfg = WaveformConfig { expansion: u, ..config.waveform };
        let link = Link::new(
            cfg,
            config.preamble_period,
            config.preamble_periods,
            config.pilot_interval,
        )?;
        for (name, taps_ms) in &scenarios {
            for &snr in &config.snr_grid_db {
                let label = format!("chanest-{name}-u{u}-snr{snr}");
                let outcomes: Vec<PacketOutcome> =
                    run_trials(config.packets_per_point.min(50), config.workers, |trial| {
                        let seed = derive_seed(config.master_seed, &label, trial as u64);
                        let plan = plan_for(&cfg, u, derive_seed(seed, "plan", 0)).expect("plan");
                        let bits =
                            link.random_bits(config.bits_per_packet, derive_seed(seed, "bits", 0));
                        // static off-grid taps at the given millisecond deltas
                        let fs = cfg.sample_rate();
                        let mut rng = rng_from(derive_seed(seed, "taps", 0));
                        let taps: Vec<(usize, num_complex::Complex64)> = taps_ms
                            .iter()
                            .map(|&(ms, amp)| {
                                let d = (ms as f64 * 1e-3 * fs) as usize
                                    + rng.gen_range(3..(cfg.samples_per_symbol() / 3).max(4));
                                let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                                (d, num_complex::Complex64::from_polar(amp, phase))
                            })
                            .collect();
                        let chan = static_channel(&taps, fs);
                        let spec = PacketSpec {
                            plan: &plan,
                            bits: &bits,
                            channel: ChannelKind::Fading(&chan),
                            snr_db: snr,
                            interference: None,
                            nmf_profile: None,
                            est_noise_psd: None,
                            noise_seed: derive_seed(seed, "noise", 0),
                        };
                        run_packet(&link, &spec, &[CsiMode::Estimated]).expect("packet")[0].clone()
                    });
                let (bits, errors) = crate::chain::tally(&outcomes);
                let diag = CellDiag::collect(&outcomes);
                let mut extra = diag.extra(outcomes.len());
                extra.push(("scenario".into(), (*name).into()));
                let recoverable =
                    outcomes.iter().filter(|o| o.recoverable == Some(true)).count();
                extra.push((
                    "recoverable_rate".into(),
                    format!("{:.4}", recoverable as f64 / outcomes.len() as f64),
                ));
                rows.push(ResultRow {
                    experiment: "chanest".into(),
                    u,
                    placement: if u == 1 { "contiguous".into() } else { "segmented-random".into() },
                    snr_db: snr,
                    bits,
                    errors,
                    extra,
                });
            }
        }
    }
    Ok(rows)
}

/// Static multipath as a degenerate channel realization.
pub fn static_channel(
    taps: &[(usize, num_complex::Complex64)],
    sample_rate: f64,
) -> fmtss::channel::ChannelRealization {
    let max_d = taps.iter().map(|&(d, _)| d).max().unwrap_or(0);
    let mut rows = vec![vec![num_complex::Complex64::new(0.0, 0.0); 2]; max_d + 1];
    for &(d, g) in taps {
        rows[d] = vec![g; 2];
    }
    fmtss::channel::ChannelRealization {
        taps: rows,
        first_delay: 0,
        sample_rate,
        samples_per_update: usize::MAX / 4,
        short_realization: false,
    }
}

/// Loopback: identity channel, no noise, perfect CSI; every bit must
/// survive.
pub fn run_loopback(config: &ExperimentConfig, total_bits: usize) -> anyhow::Result<Vec<ResultRow>> {
    config.validate()?;
    let mut rows = Vec::new();
    for &u in &config.expansions {
        let cfg = WaveformConfig { expansion: u, ..config.waveform };
        let link = Link::new(
            cfg,
            config.preamble_period,
            config.preamble_periods,
            config.pilot_interval,
        )?;
        let packets = total_bits.div_ceil(config.bits_per_packet);
        let outcomes: Vec<PacketOutcome> = run_trials(packets, config.workers, |trial| {
            let label = format!("loopback-u{u}");
            let seed = derive_seed(config.master_seed, &label, trial as u64);
            let plan = plan_for(&cfg, u, derive_seed(seed, "plan", 0)).expect("plan");
            let bits = link.random_bits(config.bits_per_packet, derive_seed(seed, "bits", 0));
            let spec = PacketSpec {
                plan: &plan,
                bits: &bits,
                channel: ChannelKind::Identity,
                snr_db: f64::INFINITY,
                interference: None,
                nmf_profile: None,
                est_noise_psd: None,
                noise_seed: 0,
            };
            run_packet(&link, &spec, &[CsiMode::Perfect]).expect("packet")[0].clone()
        });
        let (bits, errors) = crate::chain::tally(&outcomes);
        let diag = CellDiag::collect(&outcomes);
        rows.push(ResultRow {
            experiment: "loopback".into(),
            u,
            placement: if u == 1 { "contiguous".into() } else { "segmented-random".into() },
            snr_db: f64::INFINITY,
            bits,
            errors,
            extra: diag.extra(outcomes.len()),
        });
    }
    Ok(rows)
}
