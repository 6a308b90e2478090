//! Multicode bit/chip mapping, preamble construction, and payload assembly.
//!
//! Data symbols are columns of an orthogonal chip alphabet applied across
//! the subcarriers; pilot symbols apply one common value to every branch
//! and are inserted every `pilot_interval` columns, starting at column 0.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Orthogonal multicode chip alphabet, columns of the scaled DFT matrix.
#[derive(Debug, Clone)]
pub struct MulticodeAlphabet {
    /// `columns[i]` is the chip vector for symbol index `i`, length K,
    /// entries of unit magnitude, column energy K.
    pub columns: Vec<Vec<Complex64>>,
    pub subcarriers: usize,
}

impl MulticodeAlphabet {
    pub fn size(&self) -> usize {
        self.columns.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.size().trailing_zeros() as usize
    }
}

/// First `alphabet_size` columns of the size-K DFT matrix, scaled so each
/// column has energy K.
pub fn build_alphabet(subcarriers: usize, alphabet_size: usize) -> Result<MulticodeAlphabet> {
    if alphabet_size > subcarriers {
        return Err(Error::InvalidConfig(format!(
            "alphabet size {alphabet_size} exceeds subcarrier count {subcarriers}"
        )));
    }
    if !alphabet_size.is_power_of_two() || !subcarriers.is_power_of_two() {
        return Err(Error::InvalidConfig("alphabet and subcarrier counts must be powers of two".into()));
    }
    let k = subcarriers as f64;
    let columns = (0..alphabet_size)
        .map(|i| {
            (0..subcarriers)
                .map(|m| {
                    let phase = -2.0 * PI * (m * i) as f64 / k;
                    Complex64::new(phase.cos(), phase.sin())
                })
                .collect()
        })
        .collect();
    Ok(MulticodeAlphabet { columns, subcarriers })
}

/// Constant-amplitude sequence with ideal periodic autocorrelation,
/// repeated `periods` times. Even lengths use the quadratic-phase form
/// exp(j pi l^2 / Z); odd lengths use exp(j pi l (l+1) / Z).
pub fn build_preamble(period: usize, periods: usize) -> Vec<Complex64> {
    let one = preamble_period(period);
    let mut out = Vec::with_capacity(period * periods);
    for _ in 0..periods {
        out.extend_from_slice(&one);
    }
    out
}

/// One period of the preamble symbol sequence.
pub fn preamble_period(period: usize) -> Vec<Complex64> {
    (0..period)
        .map(|l| {
            let lf = l as f64;
            let phase = if period % 2 == 0 {
                PI * lf * lf / period as f64
            } else {
                PI * lf * (lf + 1.0) / period as f64
            };
            Complex64::new(phase.cos(), phase.sin())
        })
        .collect()
}

/// Pilot values: the preamble-generating sequence continued cyclically.
pub fn pilot_values(period: usize, count: usize) -> Vec<Complex64> {
    let one = preamble_period(period);
    (0..count).map(|l| one[l % period]).collect()
}

/// Column layout of a packet payload: pilots at every `pilot_interval`-th
/// column, data elsewhere.
#[derive(Debug, Clone)]
pub struct FrameLayout {
    pub data_symbols: usize,
    pub pilot_interval: usize,
    pub preamble_period: usize,
    pub preamble_periods: usize,
}

impl FrameLayout {
    pub fn new(
        data_symbols: usize,
        pilot_interval: usize,
        preamble_period: usize,
        preamble_periods: usize,
    ) -> Self {
        Self { data_symbols, pilot_interval, preamble_period, preamble_periods }
    }

    pub fn pilot_count(&self) -> usize {
        if self.data_symbols == 0 {
            0
        } else {
            self.data_symbols.div_ceil(self.pilot_interval - 1)
        }
    }

    pub fn payload_columns(&self) -> usize {
        self.data_symbols + self.pilot_count()
    }

    pub fn preamble_symbols(&self) -> usize {
        self.preamble_period * self.preamble_periods
    }

    pub fn total_symbols(&self) -> usize {
        self.preamble_symbols() + self.payload_columns()
    }

    pub fn is_pilot(&self, column: usize) -> bool {
        column % self.pilot_interval == 0
    }

    /// Payload column indices holding data, in transmission order.
    pub fn data_columns(&self) -> Vec<usize> {
        (0..self.payload_columns()).filter(|&n| !self.is_pilot(n)).collect()
    }

    /// Payload column indices holding pilots, in transmission order.
    pub fn pilot_columns(&self) -> Vec<usize> {
        (0..self.payload_columns()).filter(|&n| self.is_pilot(n)).collect()
    }
}

/// A packet: preamble symbols, pilot-interleaved payload chip matrix, and
/// the source bits.
#[derive(Debug, Clone)]
pub struct PacketFrame {
    /// Preamble symbol sequence, `preamble_period * preamble_periods` values.
    pub preamble_symbols: Vec<Complex64>,
    /// Payload columns, each of length K.
    pub payload: Vec<Vec<Complex64>>,
    /// Encoded data symbol indices in transmission order.
    pub symbol_indices: Vec<usize>,
    /// Source bits, one 0/1 value per entry.
    pub bits: Vec<u8>,
    pub layout: FrameLayout,
}

impl PacketFrame {
    /// Column `n` of the full transmitted symbol matrix, preamble first.
    /// Preamble columns apply the same symbol to every subcarrier.
    pub fn column(&self, n: usize, subcarriers: usize) -> Vec<Complex64> {
        let pre = self.preamble_symbols.len();
        if n < pre {
            vec![self.preamble_symbols[n]; subcarriers]
        } else {
            self.payload[n - pre].clone()
        }
    }

    pub fn total_symbols(&self) -> usize {
        self.preamble_symbols.len() + self.payload.len()
    }
}

/// Map a bit group to a symbol index, big-endian.
fn group_to_index(bits: &[u8]) -> usize {
    bits.iter().fold(0usize, |acc, &b| (acc << 1) | (b as usize & 1))
}

/// Encode source bits into a pilot-interleaved packet.
pub fn encode(
    bits: &[u8],
    alphabet: &MulticodeAlphabet,
    preamble_period: usize,
    preamble_periods: usize,
    pilot_interval: usize,
) -> Result<PacketFrame> {
    let bps = alphabet.bits_per_symbol();
    if pilot_interval < 2 {
        return Err(Error::InvalidConfig("pilot interval must be at least 2".into()));
    }
    if bps == 0 || bits.len() % bps != 0 {
        return Err(Error::InvalidConfig(format!(
            "bit count {} not divisible by {} bits per symbol",
            bits.len(),
            bps
        )));
    }
    let symbol_indices: Vec<usize> = bits.chunks(bps).map(group_to_index).collect();
    let layout =
        FrameLayout::new(symbol_indices.len(), pilot_interval, preamble_period, preamble_periods);
    let pilots = pilot_values(preamble_period, layout.pilot_count());

    let mut payload = Vec::with_capacity(layout.payload_columns());
    let mut next_data = 0usize;
    let mut next_pilot = 0usize;
    for n in 0..layout.payload_columns() {
        if layout.is_pilot(n) {
            payload.push(vec![pilots[next_pilot]; alphabet.subcarriers]);
            next_pilot += 1;
        } else {
            payload.push(alphabet.columns[symbol_indices[next_data]].clone());
            next_data += 1;
        }
    }

    Ok(PacketFrame {
        preamble_symbols: build_preamble(preamble_period, preamble_periods),
        payload,
        symbol_indices,
        bits: bits.to_vec(),
        layout,
    })
}

/// Exact inverse of the bit-group-to-index mapping.
pub fn decode_symbols(indices: &[usize], alphabet_size: usize) -> Result<Vec<u8>> {
    let bps = alphabet_size.trailing_zeros() as usize;
    let mut bits = Vec::with_capacity(indices.len() * bps);
    for &i in indices {
        if i >= alphabet_size {
            return Err(Error::InvalidConfig(format!(
                "symbol index {i} out of range for alphabet of {alphabet_size}"
            )));
        }
        for b in (0..bps).rev() {
            bits.push(((i >> b) & 1) as u8);
        }
    }
    Ok(bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn size_two_alphabet() {
        let a = build_alphabet(2, 2).unwrap();
        assert!((a.columns[0][0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((a.columns[0][1] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((a.columns[1][0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((a.columns[1][1] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn alphabet_columns_orthogonal_with_energy_k() {
        let a = build_alphabet(32, 4).unwrap();
        assert_eq!(a.bits_per_symbol(), 2);
        for i in 0..4 {
            for j in 0..4 {
                let inner: Complex64 = a.columns[i]
                    .iter()
                    .zip(a.columns[j].iter())
                    .map(|(x, y)| x.conj() * y)
                    .sum();
                if i == j {
                    assert!((inner - Complex64::new(32.0, 0.0)).norm() < 1e-12);
                } else {
                    assert!(inner.norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn alphabet_rejects_oversize() {
        assert!(build_alphabet(4, 8).is_err());
    }

    #[test]
    fn preamble_has_ideal_periodic_autocorrelation() {
        for z in [7usize, 16, 15, 64] {
            let seq = preamble_period(z);
            for s in &seq {
                assert!((s.norm() - 1.0).abs() < 1e-12);
            }
            for lag in 1..z {
                let acc: Complex64 =
                    (0..z).map(|l| seq[(l + lag) % z] * seq[l].conj()).sum();
                assert!(acc.norm() < 1e-9, "Z={z} lag={lag}: {}", acc.norm());
            }
        }
    }

    #[test]
    fn layout_counts_match_hand_computation() {
        // 512 bits at 2 bits/symbol with pilots every 4th column:
        // 256 data columns plus 86 pilots
        let layout = FrameLayout::new(256, 4, 16, 4);
        assert_eq!(layout.pilot_count(), 86);
        assert_eq!(layout.payload_columns(), 342);
        for n in 0..layout.payload_columns() {
            assert_eq!(layout.is_pilot(n), n % 4 == 0);
        }
    }

    #[test]
    fn encode_examples() {
        let a = build_alphabet(8, 4).unwrap();
        let frame = encode(&[0, 0, 0, 1, 1, 0, 1, 1], &a, 16, 4, 4).unwrap();
        assert_eq!(frame.symbol_indices, vec![0, 1, 2, 3]);
        // pilots are rank-1 across subcarriers
        for n in 0..frame.payload.len() {
            if frame.layout.is_pilot(n) {
                let first = frame.payload[n][0];
                for v in &frame.payload[n] {
                    assert!((v - first).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn empty_payload_has_zero_columns() {
        let a = build_alphabet(8, 4).unwrap();
        let frame = encode(&[], &a, 16, 4, 4).unwrap();
        assert_eq!(frame.payload.len(), 0);
        assert_eq!(frame.preamble_symbols.len(), 64);
    }

    #[test]
    fn encode_rejects_indivisible_bits() {
        let a = build_alphabet(8, 4).unwrap();
        assert!(encode(&[1, 0, 1], &a, 16, 4, 4).is_err());
    }

    #[test]
    fn decode_rejects_out_of_range() {
        assert!(decode_symbols(&[4], 4).is_err());
        assert_eq!(decode_symbols(&[3], 4).unwrap(), vec![1, 1]);
        assert_eq!(decode_symbols(&[0], 2).unwrap(), vec![0]);
    }

    proptest! {
        #[test]
        fn bit_roundtrip(bits in proptest::collection::vec(0u8..2, 0..512)) {
            let usable = bits.len() - bits.len() % 2;
            let bits = &bits[..usable];
            let a = build_alphabet(32, 4).unwrap();
            let frame = encode(bits, &a, 16, 4, 4).unwrap();
            let back = decode_symbols(&frame.symbol_indices, 4).unwrap();
            prop_assert_eq!(back.as_slice(), bits);
        }
    }
}
