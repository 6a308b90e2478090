// temporary probe: exact-support MMSE conditioning vs span at u=8, Z=16
use fmtss::chanest::mmse::{mmse_estimate, MmseInputs, PriorScale};
use fmtss::chanest::bpdn::PdpEstimate;
use fmtss::config::WaveformConfig;
use fmtss::filter::build_prototype;
use fmtss::framing::{build_alphabet, encode};
use fmtss::plan::{place_subcarriers, Placement};
use fmtss::pulse::build_pulse_bank;
use fmtss::rng::{complex_gaussian, rng_from};
use fmtss::rx::{build_nmf, build_remap, correlate_preamble, demod_fc, TimingParams};
use fmtss::tx::modulate_fc;
use num_complex::Complex64;
use rand::Rng;

fn main() {
    let z = 16usize;
    let cfg = WaveformConfig {
        subcarriers: 32, expansion: 8, alphabet_size: 4,
        filter_half_span: 8, block_symbols: 64, ..WaveformConfig::default()
    };
    let m_prime = 2 * cfg.subcarriers * z;
    let m = m_prime * cfg.expansion;
    let proto = build_prototype(&cfg).unwrap();
    let alphabet = build_alphabet(32, 4).unwrap();
    for &span in &[102usize, 204, 307, 409, 460] {
        for reg_exp in [-12i32] {
        let margin = 0usize;
            let mut nmses = Vec::new();
            for seed in 0..2u64 {
                let mut rng = rng_from(1000 + seed);
                let plan = place_subcarriers(&cfg, Placement::SegmentedRandom, seed).unwrap();
                let bank = build_pulse_bank(&plan, &proto, &cfg).unwrap();
                let bits: Vec<u8> = (0..256).map(|_| rng.gen_range(0..2u8)).collect();
                let frame = encode(&bits, &alphabet, z, 4, 4).unwrap();
                let x = modulate_fc(&frame, &plan, &proto, &cfg).unwrap();
                // clustered support: four mode-like runs spread over 2.5 ms
                let clusters = 4usize;
                let run = span / clusters;
                let spread = (2.5e-3 * cfg.sample_rate()) as usize;
                let mut delays: Vec<usize> = Vec::new();
                for c in 0..clusters {
                    let start = c * spread / clusters;
                    for d in 0..run { delays.push(start + d); }
                }
                while delays.len() < span { delays.push(delays.last().unwrap() + 1); }
                let taps: Vec<Complex64> = (0..delays.len()).map(|_| complex_gaussian(&mut rng)).collect();
                let scale = 1.0 / taps.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                let dmax = *delays.iter().max().unwrap();
                let mut rx = vec![Complex64::new(0.0, 0.0); x.len() + dmax + 1];
                for (j, &g) in taps.iter().enumerate() {
                    let d = delays[j];
                    for (i, &v) in x.samples.iter().enumerate() { rx[i + d] += v * g * scale; }
                }
                let rx = fmtss::SampleStream::new(rx, cfg.sample_rate());
                let op = build_remap(&plan, cfg.fc_block_len()).unwrap();
                let nmf = build_nmf(&plan, &proto, &cfg, &[]).unwrap();
                let y = demod_fc(&rx, &op, &nmf, &cfg).unwrap();
                let timing = correlate_preamble(&y, &frame.preamble_symbols, &cfg, TimingParams::with_period(z)).unwrap();
                // exact support +/- margin, relative to anchor
                let anchor = (timing.offset * cfg.expansion) as i64;
                let base = cfg.filter_half_len_full() as i64;
                let rel0 = base - anchor;
                let mut rho = vec![0.0f64; m];
                let mut support = vec![];
                for &d in &delays {
                    for dd in (d as i64 - margin as i64)..=(d as i64 + margin as i64) {
                        let r = (rel0 + dd).rem_euclid(m as i64) as usize;
                        rho[r] = 1.0 / span as f64;
                        support.push(r);
                    }
                }
                support.sort_unstable(); support.dedup();
                if 2 * support.len() > m_prime { println!("span {span} margin {margin}: support {} over budget", support.len()); continue; }
                let pdp = PdpEstimate { rho, support, kappa_trace: vec![], converged: true };
                let est = mmse_estimate(&MmseInputs {
                    rx: &rx, timing_offset: timing.offset, preamble_period: z,
                    plan: &plan, bank: &bank, cfg: &cfg, pdp: &pdp, pdp_window_start: 0,
                    noise_psd: &[], noise_variance: 10f64.powi(reg_exp) * rx.mean_power(),
                    prior_scale: PriorScale::Calibrated,
                }).unwrap();
                let truth: Vec<(i64, Complex64)> = taps.iter().enumerate()
                    .map(|(j, &g)| (rel0 + delays[j] as i64, g * scale)).collect();
                nmses.push(est.nmse_against_taps(&truth));
            }
            println!("span {span} reg 1e{reg_exp}: NMSE {:?}", nmses.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>());
        }
    }
}
