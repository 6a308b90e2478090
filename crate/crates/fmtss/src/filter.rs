//! Square-root raised-cosine prototype filter, roll-off 1.0.
//!
//! With 100% excess bandwidth the continuous impulse response reduces to
//! `(4/pi) cos(2 pi t/T) / (1 - (4 t/T)^2)`, which has a removable
//! singularity at `|t| = T/4` and no other special points.

use crate::config::WaveformConfig;
use crate::error::Result;

/// Zero-phase prototype filter taps at two rates.
#[derive(Debug, Clone)]
pub struct PrototypeFilter {
    /// Taps at the intermediate (critically sampled) rate 2*f_b,
    /// `2*half_intermediate + 1` values, center at index `half_intermediate`.
    pub taps_intermediate: Vec<f64>,
    /// Taps at the full rate f_s, `2*half_full + 1` values, unit energy.
    pub taps_full: Vec<f64>,
    pub half_intermediate: usize,
    pub half_full: usize,
}

/// Continuous SRRC impulse response with roll-off 1, argument in symbol
/// intervals, peak value 4/pi at the origin.
pub fn srrc_unit(x: f64) -> f64 {
    use std::f64::consts::PI;
    let ax = x.abs();
    if (ax - 0.25).abs() < 1e-9 {
        // limit at the removable singularity
        return 1.0;
    }
    (4.0 / PI) * (2.0 * PI * x).cos() / (1.0 - 16.0 * x * x)
}

/// Build the prototype filter for a waveform configuration.
///
/// The full-rate taps are normalized to unit energy; the intermediate-rate
/// taps keep the natural continuous-time scale.
pub fn build_prototype(cfg: &WaveformConfig) -> Result<PrototypeFilter> {
    cfg.validate()?;
    let half_i = cfg.filter_half_span;
    let half_f = cfg.filter_half_len_full();
    let l = cfg.samples_per_symbol() as f64;

    let taps_intermediate: Vec<f64> =
        (-(half_i as i64)..=half_i as i64).map(|m| srrc_unit(m as f64 / 2.0)).collect();

    let mut taps_full: Vec<f64> =
        (-(half_f as i64)..=half_f as i64).map(|m| srrc_unit(m as f64 / l)).collect();
    let energy: f64 = taps_full.iter().map(|v| v * v).sum();
    let scale = 1.0 / energy.sqrt();
    for t in &mut taps_full {
        *t *= scale;
    }

    Ok(PrototypeFilter { taps_intermediate, taps_full, half_intermediate: half_i, half_full: half_f })
}

impl PrototypeFilter {
    /// Tap value at signed full-rate index `m` (0 = center), 0 outside span.
    pub fn full_at(&self, m: i64) -> f64 {
        let idx = m + self.half_full as i64;
        if idx < 0 || idx as usize >= self.taps_full.len() {
            0.0
        } else {
            self.taps_full[idx as usize]
        }
    }
}
