//! Preamble timing acquisition on the remapped, matched-filtered stream.

use crate::config::WaveformConfig;
use crate::error::{Error, Result};
use crate::rx::demod::demod_fc;
use crate::rx::nmf::NmfFilter;
use crate::rx::remap::RemapOperator;
use crate::stream::SampleStream;
use num_complex::Complex64;

/// Result of preamble correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingEstimate {
    /// Contiguous-rate sample index of the first preamble symbol's center.
    pub offset: usize,
    /// Magnitude of the correlation at the selected offset.
    pub peak_metric: f64,
    /// Second-largest correlation peak outside one symbol of the first,
    /// searched within half a preamble period, relative to the first.
    pub ambiguity_ratio: f64,
    /// Median correlation magnitude across all lags, the detection
    /// reference level.
    pub median_metric: f64,
}

/// Knobs for the correlator.
#[derive(Debug, Clone, Copy)]
pub struct TimingParams {
    /// Detection declares when the peak exceeds this multiple of the
    /// median correlation magnitude.
    pub detection_factor: f64,
    /// Preamble period in symbols. The ambiguity search spans half a
    /// period around the main peak, which keeps the full-height copies at
    /// whole-period lags out of the ratio. When unset, an eighth of the
    /// sequence length is used (half a period for four periods).
    pub period_symbols: Option<usize>,
}

impl Default for TimingParams {
    fn default() -> Self {
        Self { detection_factor: 6.0, period_symbols: None }
    }
}

impl TimingParams {
    pub fn with_period(period_symbols: usize) -> Self {
        Self { period_symbols: Some(period_symbols), ..Self::default() }
    }
}

/// Remap and filter the received stream, then correlate with the known
/// preamble symbol sequence.
pub fn acquire_timing(
    rx: &SampleStream,
    op: &RemapOperator,
    nmf: &NmfFilter,
    cfg: &WaveformConfig,
    preamble_symbols: &[Complex64],
    params: TimingParams,
) -> Result<TimingEstimate> {
    let y = demod_fc(rx, op, nmf, cfg)?;
    correlate_preamble(&y, preamble_symbols, cfg, params)
}

/// Correlate a contiguous-rate stream against the preamble sequence
/// expanded to the sample grid (one reference symbol every `2K` samples).
pub fn correlate_preamble(
    y_prime: &SampleStream,
    preamble_symbols: &[Complex64],
    cfg: &WaveformConfig,
    params: TimingParams,
) -> Result<TimingEstimate> {
    let l_sym = cfg.samples_per_symbol_contiguous();
    let z = preamble_symbols.len();
    if z == 0 {
        return Err(Error::InvalidConfig("empty preamble".into()));
    }
    let span = (z - 1) * l_sym + 1;
    if y_prime.len() < span {
        return Err(Error::InvalidConfig(format!(
            "stream of {} samples too short for a {span}-sample preamble",
            y_prime.len()
        )));
    }
    let n_lags = y_prime.len() - span + 1;
    let mut corr = vec![0.0f64; n_lags];
    let mut corr_cplx = vec![Complex64::new(0.0, 0.0); n_lags];
    for (tau, c) in corr_cplx.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (l, zl) in preamble_symbols.iter().enumerate() {
            acc += zl.conj() * y_prime.samples[tau + l * l_sym];
        }
        *c = acc;
    }
    for (m, c) in corr.iter_mut().zip(corr_cplx.iter()) {
        *m = c.norm();
    }

    let (offset, &peak) = corr
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .expect("nonempty correlation");
    let mut sorted = corr.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    let threshold = params.detection_factor * median;
    if peak < threshold {
        return Err(Error::NotDetected { peak, threshold });
    }

    let window_symbols = params.period_symbols.map(|p| p / 2).unwrap_or(z / 8).max(2);
    let ambiguity_ratio = secondary_peak(&corr, offset, l_sym, l_sym * window_symbols) / peak;
    Ok(TimingEstimate { offset, peak_metric: peak, ambiguity_ratio, median_metric: median })
}

/// Largest local maximum at lags more than `exclude` samples but at most
/// `window` samples away from `center`.
fn secondary_peak(corr: &[f64], center: usize, exclude: usize, window: usize) -> f64 {
    let lo = center.saturating_sub(window);
    let hi = (center + window).min(corr.len() - 1);
    let mut best = 0.0f64;
    for i in lo..=hi {
        let d = (i as i64 - center as i64).unsigned_abs() as usize;
        if d <= exclude {
            continue;
        }
        let left = if i == 0 { 0.0 } else { corr[i - 1] };
        let right = if i + 1 == corr.len() { 0.0 } else { corr[i + 1] };
        if corr[i] >= left && corr[i] >= right {
            best = best.max(corr[i]);
        }
    }
    best
}

/// Diagnostic for placement-induced timing ambiguity: the correlation
/// peak after delaying the full-rate input by `delay` samples, relative
/// to the undelayed peak. Uniform placements retain near-full peaks at
/// every grating step of `L/(2u)` samples, so a sub-symbol delay still
/// fires the correlator (at the wrong offset); scattered placements
/// collapse it.
pub fn delayed_peak_ratio(
    rx: &SampleStream,
    op: &RemapOperator,
    nmf: &NmfFilter,
    cfg: &WaveformConfig,
    preamble_symbols: &[Complex64],
    delay: usize,
) -> Result<f64> {
    let reference = acquire_timing(rx, op, nmf, cfg, preamble_symbols, TimingParams::default())?;
    let mut shifted = vec![Complex64::new(0.0, 0.0); delay];
    shifted.extend_from_slice(&rx.samples);
    let delayed = SampleStream::new(shifted, rx.rate);
    let y = demod_fc(&delayed, op, nmf, cfg)?;
    // peak over all lags, regardless of where it lands
    let quiet = TimingParams { detection_factor: 0.0, ..TimingParams::default() };
    let est = correlate_preamble(&y, preamble_symbols, cfg, quiet)?;
    Ok(est.peak_metric / reference.peak_metric)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::build_prototype;
    use crate::framing::{build_alphabet, build_preamble, encode};
    use crate::plan::{build_contiguous_plan, place_subcarriers, Placement};
    use crate::rx::nmf::build_nmf;
    use crate::rx::remap::build_remap;
    use crate::tx::modulate_fc;

    fn chain(u: usize, placement: Placement, seed: u64) -> (WaveformConfig, SampleStream, Vec<Complex64>) {
        let cfg = WaveformConfig {
            subcarriers: 8,
            expansion: u,
            alphabet_size: 4,
            filter_half_span: 4,
            block_symbols: 32,
            ..WaveformConfig::default()
        };
        let proto = build_prototype(&cfg).unwrap();
        let plan = match placement {
            Placement::Contiguous => build_contiguous_plan(&cfg).unwrap(),
            p => place_subcarriers(&cfg, p, seed).unwrap(),
        };
        let alphabet = build_alphabet(8, 4).unwrap();
        let bits: Vec<u8> = (0..64).map(|i| ((i * 7) % 3 == 0) as u8).collect();
        let frame = encode(&bits, &alphabet, 16, 4, 4).unwrap();
        let x = modulate_fc(&frame, &plan, &proto, &cfg).unwrap();
        let op = build_remap(&plan, cfg.fc_block_len()).unwrap();
        let nmf = build_nmf(&plan, &proto, &cfg, &[]).unwrap();
        let y = demod_fc(&x, &op, &nmf, &cfg).unwrap();
        (cfg, y, build_preamble(16, 4))
    }

    #[test]
    fn clean_channel_offset_is_exact_and_delay_shifts_it() {
        let (cfg, y, preamble) = chain(2, Placement::SegmentedRandom, 3);
        let est = correlate_preamble(&y, &preamble, &cfg, TimingParams::default()).unwrap();
        // modulator lead is L_p full-rate samples = L_g contiguous samples
        assert_eq!(est.offset, cfg.filter_half_len_contiguous());

        // insert a known delay of 24 contiguous-rate samples
        let mut delayed = vec![Complex64::new(0.0, 0.0); 24];
        delayed.extend_from_slice(&y.samples);
        let est2 = correlate_preamble(
            &SampleStream::new(delayed, y.rate),
            &preamble,
            &cfg,
            TimingParams::default(),
        )
        .unwrap();
        assert_eq!(est2.offset, est.offset + 24);
    }

    #[test]
    fn contiguous_and_random_have_low_symbol_scale_ambiguity() {
        for placement in [Placement::Contiguous, Placement::SegmentedRandom, Placement::Random] {
            let (cfg, y, preamble) = chain(4, placement, 9);
            let est = correlate_preamble(&y, &preamble, &cfg, TimingParams::default()).unwrap();
            assert!(est.ambiguity_ratio < 0.5, "{placement}: {}", est.ambiguity_ratio);
        }
    }

    #[test]
    fn uniform_grating_keeps_firing_under_sub_symbol_delays() {
        let measure = |placement: Placement, seed: u64| {
            let cfg = WaveformConfig {
                subcarriers: 32,
                expansion: 8,
                alphabet_size: 4,
                filter_half_span: 4,
                block_symbols: 32,
                ..WaveformConfig::default()
            };
            let proto = build_prototype(&cfg).unwrap();
            let plan = match placement {
                Placement::Uniform => place_subcarriers(&cfg, placement, 0).unwrap(),
                p => place_subcarriers(&cfg, p, seed).unwrap(),
            };
            let alphabet = build_alphabet(32, 4).unwrap();
            let bits: Vec<u8> = (0..32).map(|i| (i % 3 == 0) as u8).collect();
            let frame = encode(&bits, &alphabet, 16, 4, 4).unwrap();
            let x = modulate_fc(&frame, &plan, &proto, &cfg).unwrap();
            let op = build_remap(&plan, cfg.fc_block_len()).unwrap();
            let nmf = build_nmf(&plan, &proto, &cfg, &[]).unwrap();
            // one grating step: L/(2u) full-rate samples
            let delay = cfg.samples_per_symbol() / (2 * cfg.expansion);
            delayed_peak_ratio(&x, &op, &nmf, &cfg, &frame.preamble_symbols, delay).unwrap()
        };
        let uni = measure(Placement::Uniform, 0);
        let seg = measure(Placement::SegmentedRandom, 21);
        assert!(uni > 0.85, "uniform grating-delay peak ratio {uni}");
        assert!(seg < 0.6 && seg < uni, "segmented {seg} vs uniform {uni}");
    }

    #[test]
    fn noise_only_input_is_not_detected() {
        let cfg = WaveformConfig {
            subcarriers: 8,
            expansion: 2,
            alphabet_size: 4,
            filter_half_span: 4,
            block_symbols: 32,
            ..WaveformConfig::default()
        };
        let mut rng = crate::rng::rng_from(5);
        let y = SampleStream::new(
            (0..6000).map(|_| crate::rng::complex_gaussian(&mut rng)).collect(),
            cfg.contiguous_rate(),
        );
        let preamble = build_preamble(16, 4);
        match correlate_preamble(&y, &preamble, &cfg, TimingParams::default()) {
            Err(Error::NotDetected { .. }) => {}
            other => panic!("expected NotDetected, got {other:?}"),
        }
    }
}
