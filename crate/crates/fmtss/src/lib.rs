//! Filtered-multitone spread-spectrum (FMT-SS) modem with noncontiguous
//! subcarrier support.
//!
//! The crate is organized around the signal chain:
//!
//! - [`config`], [`plan`], [`filter`], [`pulse`], [`gains`]: waveform
//!   parameters, subcarrier frequency plans, the prototype filter, the
//!   composite pulse bank, and crest-factor-minimized spreading gains.
//! - [`framing`]: multicode bit/chip mapping, preamble construction, and
//!   pilot-interleaved payload assembly.
//! - [`tx`]: waveform synthesis by direct filter-bank convolution and by
//!   the fast-convolution (overlap-save) structure.
//! - [`channel`]: wideband HF fading channel realizations, partial-band
//!   interference, and passband-SNR-calibrated noise.
//! - [`rx`]: subcarrier remapping, normalized matched filtering, timing
//!   acquisition, the fast-convolution receive pipeline, and RAKE
//!   multicode detection.
//! - [`chanest`]: sparse power-delay-profile estimation from pilots and
//!   pruned MMSE impulse-response estimation from the preamble.
//! - [`io`]: file formats exchanged between the tools (plan JSON, complex
//!   waveform binaries, bit sidecars, decode reports).

pub mod chanest;
pub mod channel;
pub mod config;
pub mod error;
pub mod fft;
pub mod filter;
pub mod framing;
pub mod gains;
pub mod io;
pub mod linalg;
pub mod plan;
pub mod pulse;
pub mod rng;
pub mod rx;
pub mod stream;
pub mod tx;

pub use config::WaveformConfig;
pub use error::{Error, Result};
pub use plan::{Placement, SubcarrierPlan};
pub use stream::SampleStream;
