//! File formats exchanged between the tools.
//!
//! - Waveforms: interleaved 32-bit-float little-endian complex samples,
//!   with a JSON metadata sidecar.
//! - Frames: little-endian length-prefixed packed bit array plus a config
//!   hash, used for BER scoring.
//! - Decode reports and estimator diagnostics: JSON documents.

use crate::error::{Error, Result};
use crate::stream::SampleStream;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

/// Metadata sidecar written next to a waveform binary.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WaveformMeta {
    pub f_s: f64,
    pub f_b: f64,
    #[serde(rename = "K")]
    pub subcarriers: usize,
    pub u: usize,
    pub plan_hash: String,
}

/// Write interleaved f32 complex samples plus a `.json` metadata sidecar.
pub fn write_waveform(path: &Path, stream: &SampleStream, meta: &WaveformMeta) -> Result<()> {
    let mut buf = Vec::with_capacity(stream.len() * 8);
    for s in &stream.samples {
        buf.extend_from_slice(&(s.re as f32).to_le_bytes());
        buf.extend_from_slice(&(s.im as f32).to_le_bytes());
    }
    fs::write(path, buf)?;
    let meta_path = path.with_extension("json");
    fs::write(meta_path, serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

/// Read a waveform binary and its metadata sidecar.
pub fn read_waveform(path: &Path) -> Result<(SampleStream, WaveformMeta)> {
    let raw = fs::read(path)?;
    if raw.len() % 8 != 0 {
        return Err(Error::InvalidConfig(format!(
            "waveform file length {} is not a multiple of 8",
            raw.len()
        )));
    }
    let mut samples = Vec::with_capacity(raw.len() / 8);
    for chunk in raw.chunks_exact(8) {
        let re = f32::from_le_bytes(chunk[0..4].try_into().unwrap()) as f64;
        let im = f32::from_le_bytes(chunk[4..8].try_into().unwrap()) as f64;
        samples.push(Complex64::new(re, im));
    }
    let meta: WaveformMeta = serde_json::from_str(&fs::read_to_string(path.with_extension("json"))?)?;
    let stream = SampleStream::new(samples, meta.f_s);
    Ok((stream, meta))
}

/// Write source bits as a length-prefixed packed array with a config hash.
pub fn write_bit_sidecar(path: &Path, bits: &[u8], config_hash: u64) -> Result<()> {
    let mut out = fs::File::create(path)?;
    out.write_all(&(bits.len() as u64).to_le_bytes())?;
    out.write_all(&config_hash.to_le_bytes())?;
    let mut packed = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b != 0 {
            packed[i / 8] |= 1 << (i % 8);
        }
    }
    out.write_all(&packed)?;
    Ok(())
}

/// Read a bit sidecar, returning (bits, config hash).
pub fn read_bit_sidecar(path: &Path) -> Result<(Vec<u8>, u64)> {
    let mut file = fs::File::open(path)?;
    let mut header = [0u8; 16];
    file.read_exact(&mut header)?;
    let count = u64::from_le_bytes(header[0..8].try_into().unwrap()) as usize;
    let hash = u64::from_le_bytes(header[8..16].try_into().unwrap());
    let mut packed = Vec::new();
    file.read_to_end(&mut packed)?;
    if packed.len() < count.div_ceil(8) {
        return Err(Error::InvalidConfig("bit sidecar truncated".into()));
    }
    let bits = (0..count).map(|i| (packed[i / 8] >> (i % 8)) & 1).collect();
    Ok((bits, hash))
}

/// Per-packet decode report emitted by the receiver.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecodeReport {
    /// Timing offset in contiguous-rate samples.
    pub timing_offset: usize,
    pub ambiguity_ratio: f64,
    pub symbol_indices: Vec<usize>,
    pub bit_errors: usize,
    pub bit_count: usize,
}

/// Channel-estimation diagnostics emitted per packet.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub support: Vec<usize>,
    pub kappa_trace: Vec<f64>,
    pub converged: bool,
    /// Normalized MSE versus the true channel when the harness knows it.
    pub nmse: Option<f64>,
    pub recoverable: bool,
    pub conservative_flag: bool,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}
