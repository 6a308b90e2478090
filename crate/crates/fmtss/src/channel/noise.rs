//! Passband-SNR-calibrated noise injection and SNR measurement.
//!
//! The SNR is the ratio of signal power to noise-plus-interference power
//! with both integrals restricted to the union of subcarrier passbands, so
//! expanding the channel bandwidth does not change the operating point.

use crate::error::{Error, Result};
use crate::fft::fft;
use crate::plan::SubcarrierPlan;
use crate::rng::{complex_gaussian, rng_from};
use crate::stream::SampleStream;

/// True for every FFT bin that falls inside a planned subcarrier passband.
fn passband_bins(plan: &SubcarrierPlan, n: usize, sample_rate: f64) -> Vec<bool> {
    let fb = plan.symbol_rate;
    let freqs = plan.frequencies();
    (0..n)
        .map(|q| {
            let mut f = q as f64 * sample_rate / n as f64;
            if f >= sample_rate / 2.0 {
                f -= sample_rate;
            }
            freqs.iter().any(|&fk| (f - fk).abs() < fb)
        })
        .collect()
}

/// Mean per-sample power of a stream restricted to the plan's passbands.
pub fn measure_passband_power(stream: &SampleStream, plan: &SubcarrierPlan) -> f64 {
    if stream.is_empty() {
        return 0.0;
    }
    let n = stream.len();
    let spec = fft(&stream.samples);
    let bins = passband_bins(plan, n, stream.rate);
    let mut acc = 0.0;
    for (v, &inside) in spec.iter().zip(bins.iter()) {
        if inside {
            acc += v.norm_sqr();
        }
    }
    acc / (n as f64 * n as f64)
}

/// Passband SNR in dB between a signal stream and a noise-plus-interference
/// reference at the same rate. Returns negative infinity for a dead signal.
pub fn measure_snr(signal: &SampleStream, noise_ref: &SampleStream, plan: &SubcarrierPlan) -> f64 {
    let p_sig = measure_passband_power(signal, plan);
    let p_noise = measure_passband_power(noise_ref, plan);
    if p_sig <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p_noise <= 0.0 {
        return f64::INFINITY;
    }
    10.0 * (p_sig / p_noise).log10()
}

/// Add white complex Gaussian noise calibrated so the passband SNR equals
/// `target_snr_db`. Returns the noisy stream and the noise-only stream.
pub fn add_noise_at_snr(
    y: &SampleStream,
    plan: &SubcarrierPlan,
    target_snr_db: f64,
    rng_seed: u64,
) -> Result<(SampleStream, SampleStream)> {
    if target_snr_db.is_infinite() && target_snr_db > 0.0 {
        return Ok((y.clone(), SampleStream::zeros(y.len(), y.rate)));
    }
    let p_pb = measure_passband_power(y, plan);
    if p_pb <= 0.0 {
        return Err(Error::ZeroSignal);
    }
    let n = y.len();
    let bins = passband_bins(plan, n, y.rate);
    let pb_fraction = bins.iter().filter(|&&b| b).count() as f64 / n as f64;
    let snr_lin = 10f64.powf(target_snr_db / 10.0);
    // white noise of variance v has passband power v * pb_fraction
    let variance = p_pb / (snr_lin * pb_fraction);
    let amp = variance.sqrt();
    let mut rng = rng_from(rng_seed);
    let noise: Vec<num_complex::Complex64> =
        (0..n).map(|_| complex_gaussian(&mut rng) * amp).collect();
    let noise_stream = SampleStream::new(noise, y.rate);
    let noisy = y.add(&noise_stream)?;
    Ok((noisy, noise_stream))
}
