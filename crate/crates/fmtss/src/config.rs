//! Waveform parameters and the rate relations derived from them.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Parameters that fix an FMT-SS waveform.
///
/// The subcarrier bandwidth is twice the symbol rate (the prototype filter
/// has 100% excess bandwidth), so `K` subcarriers occupy a signal bandwidth
/// of `2*K*f_b` Hz inside a channel bandwidth `u` times wider.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveformConfig {
    /// Number of subcarriers (K).
    pub subcarriers: usize,
    /// Bandwidth expansion / sparsity factor (u); 1 is contiguous.
    pub expansion: usize,
    /// Symbol rate in symbols per second (f_b).
    pub symbol_rate: f64,
    /// Multicode alphabet size (M_d); each symbol carries log2(M_d) bits.
    pub alphabet_size: usize,
    /// Prototype filter half-length at the intermediate rate 2*f_b,
    /// in intermediate-rate taps per side.
    pub filter_half_span: usize,
    /// Symbols per fast-convolution block (power of two).
    pub block_symbols: usize,
}

impl Default for WaveformConfig {
    fn default() -> Self {
        Self {
            subcarriers: 32,
            expansion: 1,
            symbol_rate: 1000.0,
            alphabet_size: 4,
            filter_half_span: 8,
            block_symbols: 64,
        }
    }
}

impl WaveformConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subcarriers == 0 {
            return Err(Error::InvalidConfig("subcarriers must be >= 1".into()));
        }
        if self.expansion == 0 {
            return Err(Error::InvalidConfig("expansion must be >= 1".into()));
        }
        if !(self.symbol_rate > 0.0) {
            return Err(Error::InvalidConfig("symbol rate must be positive".into()));
        }
        if self.alphabet_size > self.subcarriers {
            return Err(Error::InvalidConfig(format!(
                "alphabet size {} exceeds subcarrier count {}",
                self.alphabet_size, self.subcarriers
            )));
        }
        if !self.alphabet_size.is_power_of_two() {
            return Err(Error::InvalidConfig("alphabet size must be a power of two".into()));
        }
        if !self.block_symbols.is_power_of_two() {
            return Err(Error::InvalidConfig("block symbol count must be a power of two".into()));
        }
        if self.filter_half_span < 4 {
            return Err(Error::InvalidConfig("filter half span must be >= 4".into()));
        }
        if self.filter_half_span % 2 != 0 {
            return Err(Error::InvalidConfig(
                "filter half span must be even (whole symbol intervals per side)".into(),
            ));
        }
        if 2 * self.filter_half_span > self.block_symbols {
            return Err(Error::InvalidConfig(format!(
                "filter span {} exceeds half the block length {}",
                2 * self.filter_half_span,
                self.block_symbols
            )));
        }
        Ok(())
    }

    /// Subcarrier bandwidth, 2*f_b.
    pub fn subcarrier_bandwidth(&self) -> f64 {
        2.0 * self.symbol_rate
    }

    /// Signal bandwidth W_s = 2*K*f_b.
    pub fn signal_bandwidth(&self) -> f64 {
        2.0 * self.subcarriers as f64 * self.symbol_rate
    }

    /// Channel bandwidth W_h = u*W_s.
    pub fn channel_bandwidth(&self) -> f64 {
        self.expansion as f64 * self.signal_bandwidth()
    }

    /// Samples per symbol at the full rate, L = 2*K*u.
    pub fn samples_per_symbol(&self) -> usize {
        2 * self.subcarriers * self.expansion
    }

    /// Full sample rate f_s = 2*K*u*f_b.
    pub fn sample_rate(&self) -> f64 {
        self.samples_per_symbol() as f64 * self.symbol_rate
    }

    /// Contiguous-domain rate after remapping, f_s/u = 2*K*f_b.
    pub fn contiguous_rate(&self) -> f64 {
        self.sample_rate() / self.expansion as f64
    }

    /// Samples per symbol at the contiguous rate, 2*K.
    pub fn samples_per_symbol_contiguous(&self) -> usize {
        2 * self.subcarriers
    }

    /// Prototype half-length in full-rate samples, L_p = half_span*K*u.
    pub fn filter_half_len_full(&self) -> usize {
        self.filter_half_span * self.subcarriers * self.expansion
    }

    /// Matched/NMF filter half-length at the contiguous rate, L_g = L_p/u.
    pub fn filter_half_len_contiguous(&self) -> usize {
        self.filter_half_span * self.subcarriers
    }

    /// Fast-convolution block size in full-rate samples, N = 2*K*u*N_s.
    pub fn fc_block_len(&self) -> usize {
        self.samples_per_symbol() * self.block_symbols
    }

    /// Bits carried by one multicode symbol.
    pub fn bits_per_symbol(&self) -> usize {
        self.alphabet_size.trailing_zeros() as usize
    }
}
