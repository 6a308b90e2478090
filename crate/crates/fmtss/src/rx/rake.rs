//! RAKE multicode symbol detection.
//!
//! For every payload symbol the detector correlates the filtered stream
//! against channel-matched composite waveforms, one per alphabet column:
//! the column's chip vector applied across the subcarrier pulses, passed
//! through the NMF and the channel estimate. This maximum-ratio-combines
//! the multipath components and despreads across subcarriers in one
//! correlation; held per-pilot phase corrections bridge the estimates
//! between pilot insertions.

use crate::config::WaveformConfig;
use crate::error::{Error, Result};
use crate::fft::convolve;
use crate::framing::{pilot_values, FrameLayout, MulticodeAlphabet};
use crate::plan::SubcarrierPlan;
use crate::rx::nmf::{contiguous_prototype, NmfFilter};
use crate::filter::PrototypeFilter;
use crate::stream::SampleStream;
use num_complex::Complex64;
use std::f64::consts::TAU;

/// Detector options.
#[derive(Debug, Clone, Copy)]
pub struct RakeConfig {
    /// Re-anchor the carrier phase at each pilot and hold it until the
    /// next one.
    pub pilot_tracking: bool,
}

impl Default for RakeConfig {
    fn default() -> Self {
        Self { pilot_tracking: true }
    }
}

/// Decisions and diagnostics for one packet.
#[derive(Debug, Clone)]
pub struct RakeOutput {
    /// Decided alphabet indices, one per data symbol in order.
    pub indices: Vec<usize>,
    /// Complex correlation against every alphabet column per data symbol,
    /// after the pilot phase correction.
    pub soft: Vec<Vec<Complex64>>,
    /// Unit-magnitude per-pilot corrections that were applied.
    pub corrections: Vec<Complex64>,
}

/// Channel state information for the detector: the remapped impulse
/// response and the delay of its first sample relative to the timing
/// anchor, in contiguous-rate samples.
#[derive(Debug, Clone)]
pub struct ChannelStateInfo {
    pub taps: Vec<Complex64>,
    pub start: i64,
}

/// Detect all data symbols of a packet.
///
/// `timing_offset` anchors the first preamble symbol's center in
/// `y_prime`; payload column `n` is then centered `preamble + n` symbol
/// intervals later. `updates` optionally refreshes the channel state
/// mid-packet: each entry takes effect from its payload column onward.
#[allow(clippy::too_many_arguments)]
pub fn rake_detect(
    y_prime: &SampleStream,
    csi: &ChannelStateInfo,
    timing_offset: usize,
    layout: &FrameLayout,
    alphabet: &MulticodeAlphabet,
    plan: &SubcarrierPlan,
    proto: &PrototypeFilter,
    nmf: &NmfFilter,
    cfg: &WaveformConfig,
    options: RakeConfig,
    updates: &[(usize, ChannelStateInfo)],
) -> Result<RakeOutput> {
    y_prime.check_rate(cfg.contiguous_rate())?;
    if csi.taps.is_empty() {
        return Err(Error::InvalidConfig("empty channel state information".into()));
    }
    if alphabet.subcarriers != cfg.subcarriers {
        return Err(Error::InvalidConfig("alphabet size does not match subcarrier count".into()));
    }

    // per-subcarrier contiguous pulses with the plan's gains
    let p_c = contiguous_prototype(proto, plan.expansion);
    let half_c = (p_c.len() - 1) / 2;
    let c_plan = plan.contiguous_equivalent();
    let freqs = c_plan.frequencies();
    let rate = cfg.contiguous_rate();
    let k = cfg.subcarriers;

    let mut base: Vec<Vec<Complex64>> = Vec::with_capacity(k);
    for (idx, &fk) in freqs.iter().enumerate() {
        let gain = c_plan.gains[idx];
        let step = TAU * fk / rate;
        base.push(
            (0..=2 * half_c)
                .map(|i| {
                    let r = i as i64 - half_c as i64;
                    gain * p_c[i] * Complex64::from_polar(1.0, step * r as f64)
                })
                .collect(),
        );
    }

    // composite chip waveforms per alphabet column, plus the pilot composite
    let combine = |weights: &dyn Fn(usize) -> Complex64| -> Vec<Complex64> {
        let mut acc = vec![Complex64::new(0.0, 0.0); 2 * half_c + 1];
        for (kk, b) in base.iter().enumerate() {
            let w = weights(kk);
            for (a, &v) in acc.iter_mut().zip(b.iter()) {
                *a += w * v;
            }
        }
        acc
    };
    let mut precombined: Vec<Vec<Complex64>> = alphabet
        .columns
        .iter()
        .map(|col| combine(&|kk| col[kk]))
        .collect();
    precombined.push(combine(&|_| Complex64::new(1.0, 0.0)));

    struct Templates {
        per_symbol: Vec<Vec<Complex64>>,
        pilot: Vec<Complex64>,
        pilot_gain: f64,
        v_start: i64,
    }
    let build = |state: &ChannelStateInfo| -> Templates {
        let common = convolve(&nmf.taps, &state.taps);
        let v_start = -(half_c as i64) - nmf.half as i64 + state.start;
        let mut per_symbol: Vec<Vec<Complex64>> = precombined
            .iter()
            .map(|pre| convolve(pre, &common))
            .collect();
        let pilot = per_symbol.pop().expect("pilot composite");
        let pilot_gain: f64 = pilot.iter().map(|v| v.norm_sqr()).sum();
        Templates { per_symbol, pilot, pilot_gain, v_start }
    };
    let mut active = build(csi);
    let mut pending = updates.iter().peekable();

    let correlate = |template: &[Complex64], v_start: i64, center: i64| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let start = center + v_start;
        for (j, &t) in template.iter().enumerate() {
            let idx = start + j as i64;
            if idx >= 0 && (idx as usize) < y_prime.len() {
                acc += y_prime.samples[idx as usize] * t.conj();
            }
        }
        acc
    };

    let l_sym = cfg.samples_per_symbol_contiguous() as i64;
    let payload_base = timing_offset as i64 + layout.preamble_symbols() as i64 * l_sym;
    let pilots = pilot_values(layout.preamble_period, layout.pilot_count());

    let mut indices = Vec::with_capacity(layout.data_symbols);
    let mut soft = Vec::with_capacity(layout.data_symbols);
    let mut corrections = Vec::with_capacity(layout.pilot_count());
    let mut correction = Complex64::new(1.0, 0.0);
    let mut pilot_idx = 0usize;

    for n in 0..layout.payload_columns() {
        while let Some((col, state)) = pending.peek() {
            if *col <= n {
                active = build(state);
                correction = Complex64::new(1.0, 0.0);
                pending.next();
            } else {
                break;
            }
        }
        let center = payload_base + n as i64 * l_sym;
        if layout.is_pilot(n) {
            if options.pilot_tracking && active.pilot_gain > 0.0 {
                let measured = correlate(&active.pilot, active.v_start, center);
                let c = measured * pilots[pilot_idx].conj();
                if c.norm() > 1e-12 * active.pilot_gain {
                    correction = c / c.norm();
                }
            }
            corrections.push(correction);
            pilot_idx += 1;
            continue;
        }
        let mut best = 0usize;
        let mut best_metric = f64::NEG_INFINITY;
        let mut row = Vec::with_capacity(alphabet.size());
        for (i, template) in active.per_symbol.iter().enumerate() {
            let rotated = correlate(template, active.v_start, center) * correction.conj();
            if rotated.re > best_metric {
                best_metric = rotated.re;
                best = i;
            }
            row.push(rotated);
        }
        indices.push(best);
        soft.push(row);
    }

    Ok(RakeOutput { indices, soft, corrections })
}
