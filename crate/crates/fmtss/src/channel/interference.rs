//! Partial-band interference drawn from occupancy statistics.
//!
//! Users are flat band-limited complex Gaussian processes of fixed width,
//! placed without overlap on a frequency-cell grid across the band.

use crate::error::{Error, Result};
use crate::fft::ifft_inplace;
use crate::rng::{complex_gaussian, rng_from};
use crate::stream::SampleStream;
use num_complex::Complex64;
use rand::seq::index::sample as sample_indices;

/// Interference scenario description.
#[derive(Debug, Clone, Copy)]
pub struct InterferenceSpec {
    /// Total band width in Hz, centered on 0.
    pub band_width: f64,
    /// Bandwidth of each user in Hz.
    pub user_bandwidth: f64,
    pub user_count: usize,
    /// User PSD relative to the signal passband PSD, in dB.
    pub power_offset_db: f64,
    /// Placement grid cell width in Hz.
    pub cell_width: f64,
}

impl InterferenceSpec {
    /// Congested-band scenario: 42 users of 3 kHz in a 512 kHz band at
    /// +30 dB, on a 1 kHz grid.
    pub fn congested_hf() -> Self {
        Self {
            band_width: 512_000.0,
            user_bandwidth: 3_000.0,
            user_count: 42,
            power_offset_db: 30.0,
            cell_width: 1_000.0,
        }
    }

    pub fn cells(&self) -> usize {
        (self.band_width / self.cell_width).round() as usize
    }

    pub fn cells_per_user(&self) -> usize {
        (self.user_bandwidth / self.cell_width).round() as usize
    }

    pub fn occupied_fraction(&self) -> f64 {
        (self.user_count * self.cells_per_user()) as f64 / self.cells() as f64
    }
}

/// A drawn interference environment.
#[derive(Debug, Clone)]
pub struct InterferenceRealization {
    pub stream: SampleStream,
    /// One flag per frequency cell, cell 0 at -band_width/2.
    pub occupancy_mask: Vec<bool>,
    /// Starting cell of each user.
    pub user_starts: Vec<usize>,
}

impl InterferenceRealization {
    /// Frequency range of a cell in Hz.
    pub fn cell_range(&self, spec: &InterferenceSpec, cell: usize) -> (f64, f64) {
        let lo = -spec.band_width / 2.0 + cell as f64 * spec.cell_width;
        (lo, lo + spec.cell_width)
    }
}

/// Draw non-overlapping user placements and synthesize the sum process.
///
/// `signal_psd` is the reference signal passband PSD in power per Hz; each
/// user's flat PSD sits `power_offset_db` above it. The stream is produced
/// at `sample_rate`, which must cover the band.
pub fn generate_interference(
    spec: &InterferenceSpec,
    len: usize,
    sample_rate: f64,
    signal_psd: f64,
    rng_seed: u64,
) -> Result<InterferenceRealization> {
    let cells = spec.cells();
    let cpu = spec.cells_per_user();
    if spec.user_count * cpu > cells {
        return Err(Error::Infeasible(format!(
            "{} users of {} cells exceed {} available cells",
            spec.user_count, cpu, cells
        )));
    }
    if sample_rate + 1e-9 < spec.band_width {
        return Err(Error::InvalidConfig(format!(
            "sample rate {sample_rate} cannot represent a {} Hz band",
            spec.band_width
        )));
    }
    let mut mask = vec![false; cells];
    if spec.user_count == 0 || len == 0 {
        return Ok(InterferenceRealization {
            stream: SampleStream::zeros(len, sample_rate),
            occupancy_mask: mask,
            user_starts: Vec::new(),
        });
    }

    // uniform non-overlapping placement: choose distinct values in the
    // reduced range, then re-expand by the block width
    let mut rng = rng_from(rng_seed);
    let reduced = cells - spec.user_count * (cpu - 1);
    let mut picks = sample_indices(&mut rng, reduced, spec.user_count).into_vec();
    picks.sort_unstable();
    let user_starts: Vec<usize> =
        picks.iter().enumerate().map(|(j, &a)| a + j * (cpu - 1)).collect();
    for &s in &user_starts {
        for c in s..s + cpu {
            mask[c] = true;
        }
    }

    // frequency-domain synthesis: fill the occupied bins with white
    // complex Gaussian values at the calibrated per-bin variance
    let n = len;
    let target_psd = signal_psd * 10f64.powf(spec.power_offset_db / 10.0);
    let bin_amp = (target_psd * n as f64 * sample_rate).sqrt();
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    for &s in &user_starts {
        let f_lo = -spec.band_width / 2.0 + s as f64 * spec.cell_width;
        let f_hi = f_lo + spec.user_bandwidth;
        let q_lo = (f_lo / sample_rate * n as f64).round() as i64;
        let q_hi = (f_hi / sample_rate * n as f64).round() as i64;
        for q in q_lo..q_hi {
            let idx = q.rem_euclid(n as i64) as usize;
            spectrum[idx] = complex_gaussian(&mut rng) * bin_amp;
        }
    }
    ifft_inplace(&mut spectrum);
    let scale = 1.0 / n as f64;
    let samples: Vec<Complex64> = spectrum.iter().map(|v| v * scale).collect();

    Ok(InterferenceRealization {
        stream: SampleStream::new(samples, sample_rate),
        occupancy_mask: mask,
        user_starts,
    })
}
