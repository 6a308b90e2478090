//! Monte-Carlo experiment harness for the fmtss modem.
//!
//! Experiments are driven by a declarative JSON configuration and write
//! CSV results plus a JSON run manifest. All randomness derives from the
//! master seed through labeled per-trial derivations, so identical
//! configurations produce byte-identical outputs regardless of thread
//! scheduling.

pub mod chain;
pub mod config;
pub mod experiments;
pub mod report;

pub use config::ExperimentConfig;
