//! Pilot-neighborhood collection from the filtered contiguous-rate stream.

use crate::config::WaveformConfig;
use crate::error::{Error, Result};
use crate::framing::{pilot_values, FrameLayout};
use crate::stream::SampleStream;
use num_complex::Complex64;

/// Received windows centered on each pilot, with the pilot phase removed.
#[derive(Debug, Clone)]
pub struct PilotObservation {
    /// `columns[l]` is the window around pilot `l`, `window_len` samples.
    pub columns: Vec<Vec<Complex64>>,
    /// Window length in contiguous-rate samples (six symbol intervals).
    pub window_len: usize,
    /// Offset of each window's first sample from the pilot center.
    pub window_start: i64,
    /// Time between consecutive pilots in seconds.
    pub pilot_spacing: f64,
}

/// Extract the pilot neighborhoods of a packet.
pub fn collect_pilots(
    y_prime: &SampleStream,
    layout: &FrameLayout,
    timing_offset: usize,
    cfg: &WaveformConfig,
) -> Result<PilotObservation> {
    y_prime.check_rate(cfg.contiguous_rate())?;
    let n_pilots = layout.pilot_count();
    if n_pilots == 0 {
        return Err(Error::InvalidConfig("payload carries no pilots".into()));
    }
    let l_sym = cfg.samples_per_symbol_contiguous();
    let window_len = 6 * l_sym;
    let pilots = pilot_values(layout.preamble_period, n_pilots);
    let payload_base = timing_offset as i64 + (layout.preamble_symbols() * l_sym) as i64;
    // The adjoint remap is phase-consistent with the stream only when the
    // window begins on a multiple of K contiguous samples (the band-shift
    // phases of the remap wrap there), so push the nominal start down to
    // the alignment grid. The shift is identical for every pilot.
    let grid = cfg.subcarriers as i64;
    let nominal = payload_base - (window_len / 2) as i64;
    let misalign = nominal.rem_euclid(grid);
    let window_start = -((window_len / 2) as i64) - misalign;

    let mut columns = Vec::with_capacity(n_pilots);
    for (l, &col) in layout.pilot_columns().iter().enumerate() {
        let center = payload_base + (col * l_sym) as i64;
        let phase = pilots[l].conj();
        let mut window = Vec::with_capacity(window_len);
        for j in 0..window_len {
            let idx = center + window_start + j as i64;
            let v = if idx >= 0 && (idx as usize) < y_prime.len() {
                y_prime.samples[idx as usize]
            } else {
                Complex64::new(0.0, 0.0)
            };
            window.push(v * phase);
        }
        columns.push(window);
    }

    Ok(PilotObservation {
        columns,
        window_len,
        window_start,
        pilot_spacing: layout.pilot_interval as f64 / cfg.symbol_rate,
    })
}
