//! Thin wrapper around rustfft with per-thread plan caching.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

thread_local! {
    static PLANS: RefCell<PlanCache> = RefCell::new(PlanCache::default());
}

#[derive(Default)]
struct PlanCache {
    planner: Option<FftPlanner<f64>>,
    forward: HashMap<usize, Arc<dyn Fft<f64>>>,
    inverse: HashMap<usize, Arc<dyn Fft<f64>>>,
}

impl PlanCache {
    fn forward(&mut self, len: usize) -> Arc<dyn Fft<f64>> {
        let planner = self.planner.get_or_insert_with(FftPlanner::new);
        self.forward
            .entry(len)
            .or_insert_with(|| planner.plan_fft_forward(len))
            .clone()
    }

    fn inverse(&mut self, len: usize) -> Arc<dyn Fft<f64>> {
        let planner = self.planner.get_or_insert_with(FftPlanner::new);
        self.inverse
            .entry(len)
            .or_insert_with(|| planner.plan_fft_inverse(len))
            .clone()
    }
}

/// In-place unnormalized DFT, X[q] = sum_m x[m] e^{-j2pi qm/N}.
pub fn fft_inplace(buf: &mut [Complex64]) {
    let plan = PLANS.with(|p| p.borrow_mut().forward(buf.len()));
    plan.process(buf);
}

/// In-place unnormalized inverse DFT, x[m] = sum_q X[q] e^{+j2pi qm/N}.
/// The caller is responsible for the 1/N scale where needed.
pub fn ifft_inplace(buf: &mut [Complex64]) {
    let plan = PLANS.with(|p| p.borrow_mut().inverse(buf.len()));
    plan.process(buf);
}

/// Forward DFT into a fresh buffer.
pub fn fft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    fft_inplace(&mut buf);
    buf
}

/// Inverse DFT into a fresh buffer, including the 1/N normalization.
pub fn ifft_normalized(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    ifft_inplace(&mut buf);
    let scale = 1.0 / buf.len() as f64;
    for v in &mut buf {
        *v *= scale;
    }
    buf
}

/// Linear convolution of two sequences via zero-padded FFTs.
pub fn convolve(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let mut fa = vec![Complex64::new(0.0, 0.0); n];
    let mut fb = vec![Complex64::new(0.0, 0.0); n];
    fa[..a.len()].copy_from_slice(a);
    fb[..b.len()].copy_from_slice(b);
    fft_inplace(&mut fa);
    fft_inplace(&mut fb);
    for (x, y) in fa.iter_mut().zip(fb.iter()) {
        *x *= *y;
    }
    ifft_inplace(&mut fa);
    let scale = 1.0 / n as f64;
    fa.truncate(out_len);
    for v in &mut fa {
        *v *= scale;
    }
    fa
}

/// Circular convolution on a ring of length `a.len()`; `b` is wrapped in.
pub fn circular_convolve(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let n = a.len();
    assert!(n > 0);
    let mut fb = vec![Complex64::new(0.0, 0.0); n];
    for (i, &v) in b.iter().enumerate() {
        fb[i % n] += v;
    }
    let mut fa = a.to_vec();
    fft_inplace(&mut fa);
    fft_inplace(&mut fb);
    for (x, y) in fa.iter_mut().zip(fb.iter()) {
        *x *= *y;
    }
    ifft_inplace(&mut fa);
    let scale = 1.0 / n as f64;
    for v in &mut fa {
        *v *= scale;
    }
    fa
}

/// Total energy of a complex sequence.
pub fn energy(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

/// Largest magnitude in a complex sequence (0 for empty input).
pub fn max_abs(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convolve_matches_direct() {
        let a: Vec<Complex64> = (0..17)
            .map(|i| Complex64::new(i as f64, (i as f64 * 0.3).sin()))
            .collect();
        let b: Vec<Complex64> = (0..5).map(|i| Complex64::new(1.0 - i as f64 * 0.2, 0.1)).collect();
        let fast = convolve(&a, &b);
        for m in 0..fast.len() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, &bi) in b.iter().enumerate() {
                if m >= i && m - i < a.len() {
                    acc += a[m - i] * bi;
                }
            }
            assert!((fast[m] - acc).norm() < 1e-9);
        }
    }

    #[test]
    fn fft_roundtrip() {
        let x: Vec<Complex64> = (0..64).map(|i| Complex64::new((i as f64).cos(), 0.5)).collect();
        let back = ifft_normalized(&fft(&x));
        for (u, v) in x.iter().zip(back.iter()) {
            assert!((u - v).norm() < 1e-12);
        }
    }
}
