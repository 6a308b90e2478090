//! End-to-end loopback: modulate, demodulate, acquire timing, detect with
//! perfect channel state information, and score bits. An identity channel
//! with no noise must decode without error at every expansion factor.

use fmtss::config::WaveformConfig;
use fmtss::filter::build_prototype;
use fmtss::framing::{build_alphabet, decode_symbols, encode};
use fmtss::plan::{place_subcarriers, Placement};
use fmtss::rng::rng_from;
use fmtss::rx::rake::ChannelStateInfo;
use fmtss::rx::{
    build_nmf, build_remap, correlate_preamble, demod_fc, rake_detect, RakeConfig, TimingParams,
};
use fmtss::tx::modulate_fc;
use num_complex::Complex64;
use rand::Rng;

fn identity_csi(
    plan: &fmtss::plan::SubcarrierPlan,
    cfg: &WaveformConfig,
) -> ChannelStateInfo {
    let w = 8 * cfg.samples_per_symbol_contiguous();
    let m = w * cfg.expansion;
    let op = build_remap(plan, m).unwrap();
    let mut h = vec![Complex64::new(0.0, 0.0); m];
    h[m / 2] = Complex64::new(1.0, 0.0);
    let hp = op.forward(&h).unwrap();
    ChannelStateInfo { taps: hp, start: -((w / 2) as i64) }
}

#[test]
fn clean_loopback_is_error_free_for_all_expansions() {
    for &u in &[1usize, 2, 4, 8] {
        let cfg = WaveformConfig {
            subcarriers: 32,
            expansion: u,
            alphabet_size: 4,
            filter_half_span: 8,
            block_symbols: 64,
            ..WaveformConfig::default()
        };
        let proto = build_prototype(&cfg).unwrap();
        let plan = place_subcarriers(&cfg, Placement::SegmentedRandom, 77 + u as u64).unwrap();
        let alphabet = build_alphabet(32, 4).unwrap();
        let mut rng = rng_from(u as u64);
        let bits: Vec<u8> = (0..2048).map(|_| rng.gen_range(0..2u8)).collect();
        let frame = encode(&bits, &alphabet, 16, 4, 4).unwrap();

        let x = modulate_fc(&frame, &plan, &proto, &cfg).unwrap();
        let op = build_remap(&plan, cfg.fc_block_len()).unwrap();
        let nmf = build_nmf(&plan, &proto, &cfg, &[]).unwrap();
        let y = demod_fc(&x, &op, &nmf, &cfg).unwrap();
        let timing = correlate_preamble(
            &y,
            &frame.preamble_symbols,
            &cfg,
            TimingParams::with_period(frame.layout.preamble_period),
        )
        .unwrap();
        assert!(timing.ambiguity_ratio < 0.5, "u={u}: ambiguity {}", timing.ambiguity_ratio);

        let csi = identity_csi(&plan, &cfg);
        let out = rake_detect(
            &y,
            &csi,
            timing.offset,
            &frame.layout,
            &alphabet,
            &plan,
            &proto,
            &nmf,
            &cfg,
            RakeConfig::default(),
            &[],
        )
        .unwrap();
        let decoded = decode_symbols(&out.indices, 4).unwrap();
        let errors = decoded.iter().zip(bits.iter()).filter(|(a, b)| a != b).count();
        assert_eq!(errors, 0, "u={u}: {errors} bit errors in {}", bits.len());
    }
}

#[test]
fn two_equal_taps_with_perfect_csi_decode_cleanly() {
    let u = 4usize;
    let cfg = WaveformConfig {
        subcarriers: 32,
        expansion: u,
        alphabet_size: 4,
        filter_half_span: 8,
        block_symbols: 64,
        ..WaveformConfig::default()
    };
    let proto = build_prototype(&cfg).unwrap();
    let plan = place_subcarriers(&cfg, Placement::SegmentedRandom, 5).unwrap();
    let alphabet = build_alphabet(32, 4).unwrap();
    let mut rng = rng_from(9);
    let bits: Vec<u8> = (0..1024).map(|_| rng.gen_range(0..2u8)).collect();
    let frame = encode(&bits, &alphabet, 16, 4, 4).unwrap();
    let x = modulate_fc(&frame, &plan, &proto, &cfg).unwrap();

    // two equal static taps separated beyond the filter span
    let delay = 3 * cfg.samples_per_symbol();
    let g0 = Complex64::new(0.7, 0.2);
    let g1 = Complex64::new(-0.3, 0.6);
    let mut rx = vec![Complex64::new(0.0, 0.0); x.len() + delay];
    for (i, &v) in x.samples.iter().enumerate() {
        rx[i] += v * g0;
        rx[i + delay] += v * g1;
    }
    let rx = fmtss::SampleStream::new(rx, cfg.sample_rate());

    let op = build_remap(&plan, cfg.fc_block_len()).unwrap();
    let nmf = build_nmf(&plan, &proto, &cfg, &[]).unwrap();
    let y = demod_fc(&rx, &op, &nmf, &cfg).unwrap();
    let timing = correlate_preamble(
        &y,
        &frame.preamble_symbols,
        &cfg,
        TimingParams::with_period(frame.layout.preamble_period),
    )
    .unwrap();

    // the correlator shows two peaks separated by the remapped delay
    assert!(timing.ambiguity_ratio > 0.5, "second path visible: {}", timing.ambiguity_ratio);

    // perfect CSI relative to the timing anchor (locked to the stronger
    // first path at L_g)
    let w = 10 * cfg.samples_per_symbol_contiguous();
    let m = w * cfg.expansion;
    let opw = build_remap(&plan, m).unwrap();
    let mut h = vec![Complex64::new(0.0, 0.0); m];
    let anchor_full = timing.offset * u;
    let base_full = cfg.filter_half_len_full(); // modulator lead
    let center = m / 2;
    let d0 = base_full as i64 - anchor_full as i64;
    h[(center as i64 + d0) as usize] = g0;
    h[(center as i64 + d0 + delay as i64) as usize] = g1;
    let hp = opw.forward(&h).unwrap();
    let csi = ChannelStateInfo { taps: hp, start: -((w / 2) as i64) };

    let out = rake_detect(
        &y,
        &csi,
        timing.offset,
        &frame.layout,
        &alphabet,
        &plan,
        &proto,
        &nmf,
        &cfg,
        RakeConfig::default(),
        &[],
    )
    .unwrap();
    let decoded = decode_symbols(&out.indices, 4).unwrap();
    let errors = decoded.iter().zip(bits.iter()).filter(|(a, b)| a != b).count();
    assert_eq!(errors, 0, "{errors} bit errors in {}", bits.len());
}
