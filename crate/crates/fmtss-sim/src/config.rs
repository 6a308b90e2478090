//! Declarative experiment configuration.

use fmtss::channel::{ChannelSpec, InterferenceSpec};
use fmtss::config::WaveformConfig;
use serde::{Deserialize, Serialize};

fn default_snr_grid() -> Vec<f64> {
    (-14..=0).step_by(2).map(|v| v as f64).collect()
}

fn default_packets() -> usize {
    200
}

fn default_bits() -> usize {
    512
}

fn default_trials() -> usize {
    500
}

fn default_expansions() -> Vec<usize> {
    vec![1, 2, 4, 8]
}

fn default_preamble_period() -> usize {
    64
}

fn default_preamble_periods() -> usize {
    4
}

fn default_workers() -> usize {
    2
}

/// Channel preset names accepted by the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelPreset {
    Flat,
    Mld,
    OtaLike,
}

impl ChannelPreset {
    pub fn spec(&self, sample_rate: f64) -> ChannelSpec {
        match self {
            ChannelPreset::Flat => ChannelSpec::flat(sample_rate),
            ChannelPreset::Mld => ChannelSpec::mld(sample_rate),
            ChannelPreset::OtaLike => ChannelSpec::ota_like(sample_rate),
        }
    }
}

/// Interference scenario parameters (serializable mirror of the spec).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InterferenceConfig {
    pub band_width: f64,
    pub user_bandwidth: f64,
    pub user_count: usize,
    pub power_offset_db: f64,
    pub cell_width: f64,
}

impl Default for InterferenceConfig {
    fn default() -> Self {
        let s = InterferenceSpec::congested_hf();
        Self {
            band_width: s.band_width,
            user_bandwidth: s.user_bandwidth,
            user_count: s.user_count,
            power_offset_db: s.power_offset_db,
            cell_width: s.cell_width,
        }
    }
}

impl InterferenceConfig {
    pub fn spec(&self) -> InterferenceSpec {
        InterferenceSpec {
            band_width: self.band_width,
            user_bandwidth: self.user_bandwidth,
            user_count: self.user_count,
            power_offset_db: self.power_offset_db,
            cell_width: self.cell_width,
        }
    }
}

/// Channel state information supplied to the detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CsiMode {
    Perfect,
    Estimated,
}

/// Top-level experiment configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Base waveform; `expansion` is overridden per experiment cell.
    pub waveform: WaveformConfig,
    #[serde(default = "default_expansions")]
    pub expansions: Vec<usize>,
    #[serde(default = "default_preamble_period")]
    pub preamble_period: usize,
    #[serde(default = "default_preamble_periods")]
    pub preamble_periods: usize,
    /// Pilot insertion interval in payload columns.
    #[serde(default = "default_pilot_interval")]
    pub pilot_interval: usize,
    #[serde(default = "default_channel")]
    pub channel: ChannelPreset,
    #[serde(default)]
    pub interference: Option<InterferenceConfig>,
    #[serde(default = "default_snr_grid")]
    pub snr_grid_db: Vec<f64>,
    #[serde(default = "default_packets")]
    pub packets_per_point: usize,
    #[serde(default = "default_bits")]
    pub bits_per_packet: usize,
    /// Trials per cell for the PAPR study.
    #[serde(default = "default_trials")]
    pub papr_trials: usize,
    #[serde(default = "default_csi")]
    pub csi: CsiMode,
    /// Redraw the subcarrier plan for every packet (simulation style); a
    /// fixed plan mirrors the over-the-air methodology.
    #[serde(default = "default_true")]
    pub redraw_plan_per_packet: bool,
    pub master_seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_pilot_interval() -> usize {
    4
}

fn default_channel() -> ChannelPreset {
    ChannelPreset::Mld
}

fn default_csi() -> CsiMode {
    CsiMode::Perfect
}

fn default_true() -> bool {
    true
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            waveform: WaveformConfig::default(),
            expansions: default_expansions(),
            preamble_period: default_preamble_period(),
            preamble_periods: default_preamble_periods(),
            pilot_interval: default_pilot_interval(),
            channel: default_channel(),
            interference: Some(InterferenceConfig::default()),
            snr_grid_db: default_snr_grid(),
            packets_per_point: default_packets(),
            bits_per_packet: default_bits(),
            papr_trials: default_trials(),
            csi: default_csi(),
            redraw_plan_per_packet: true,
            master_seed: 1,
            workers: default_workers(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        self.waveform.validate().map_err(|e| anyhow::anyhow!(e.to_string()))?;
        anyhow::ensure!(self.packets_per_point >= 1, "need at least one packet per point");
        anyhow::ensure!(!self.snr_grid_db.is_empty(), "SNR grid must not be empty");
        anyhow::ensure!(self.pilot_interval >= 2, "pilot interval must be at least 2");
        anyhow::ensure!(self.preamble_periods >= 3, "need at least three preamble periods");
        anyhow::ensure!(self.workers >= 1, "need at least one worker");
        Ok(())
    }

    /// Stable hash of the serialized configuration.
    pub fn content_hash(&self) -> u64 {
        let text = serde_json::to_string(self).unwrap_or_default();
        let mut h: u64 = 0xcbf29ce484222325;
        for b in text.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }
}
