//! Receiver-side processing: subcarrier remapping, normalized matched
//! filtering, timing acquisition, the fast-convolution receive pipeline,
//! and RAKE multicode detection.

pub mod demod;
pub mod nmf;
pub mod rake;
pub mod remap;
pub mod timing;

pub use demod::{demod_fc, demod_fc_reference};
pub use nmf::{build_nmf, NmfFilter};
pub use rake::{rake_detect, RakeConfig, RakeOutput};
pub use remap::{build_remap, remap_channel, RemapOperator};
pub use timing::{acquire_timing, correlate_preamble, TimingEstimate, TimingParams};
