//! Compressed-sensing recovery budget check.
//!
//! A sparse impulse response observed through M' retained frequency
//! samples is recoverable when its support size stays within half of M';
//! practical solvers want a third to a fifth of that budget.

/// Verdict of the sampling-budget check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryVerdict {
    /// Hard bound: support <= M'/2.
    pub recoverable: bool,
    /// Set when the support exceeds the conservative M'/3 budget.
    pub conservative_flag: bool,
    /// Fraction of the hard budget still unused (negative when exceeded).
    pub margin: f64,
}

/// Check a support size against the retained-sample budget `m_prime`.
pub fn recovery_check(support_size: usize, m_prime: usize) -> RecoveryVerdict {
    let budget = m_prime as f64 / 2.0;
    RecoveryVerdict {
        recoverable: (support_size as f64) <= budget,
        conservative_flag: (support_size as f64) > m_prime as f64 / 3.0,
        margin: if budget > 0.0 { 1.0 - support_size as f64 / budget } else { -1.0 },
    }
}

/// Longest recoverable channel duration in seconds for a preamble of `z`
/// symbols at expansion `u` and symbol rate `f_b`.
pub fn max_recoverable_span(z: usize, u: usize, symbol_rate: f64) -> f64 {
    z as f64 / (2.0 * u as f64 * symbol_rate)
}
