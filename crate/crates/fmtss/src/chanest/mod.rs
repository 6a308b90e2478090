//! Two-stage channel acquisition: sparse power-delay-profile estimation
//! from pilots and pruned MMSE impulse-response estimation from the
//! preamble.

pub mod bpdn;
pub mod mmse;
pub mod pilots;
pub mod recovery;
pub mod scattering;
pub mod tracking;

pub use bpdn::{
    fill_support_gaps, matched_power_kernel, smooth_pdp, solve_pdp_bpdn,
    solve_pdp_bpdn_decimated, trim_support_mass, BpdnParams, PdpEstimate,
};
pub use mmse::{mmse_estimate, ChannelEstimate, MmseInputs};
pub use pilots::{collect_pilots, PilotObservation};
pub use recovery::{recovery_check, RecoveryVerdict};
pub use scattering::{intermediate_pdp, scattering_function};
pub use tracking::pilot_tap_gains;
