//! Wideband HF channel simulation: fading realizations, partial-band
//! interference, and passband-calibrated noise.

pub mod fading;
pub mod interference;
pub mod noise;

pub use fading::{apply_channel, realize_channel, ChannelRealization, ChannelSpec, ModeSpec};
pub use interference::{generate_interference, InterferenceSpec};
pub use noise::{add_noise_at_snr, measure_passband_power, measure_snr};
