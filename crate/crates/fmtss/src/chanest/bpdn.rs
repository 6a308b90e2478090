//! Sparse power-delay-profile recovery.
//!
//! The intermediate PDP models as a circulant convolution of the true PDP
//! with the squared matched response. The solver is a block-aware greedy
//! pursuit: it repeatedly selects the delay block with the largest
//! residual correlation, fits all selected atoms by nonnegative least
//! squares, drops atoms whose coefficients collapse, and stops when the
//! normalized difference between successive estimates falls below the
//! threshold. A Gaussian smoothing pass then widens the support to cover
//! taps the pursuit may have skipped.

use crate::error::{Error, Result};
use crate::fft::{fft_inplace, ifft_inplace};
use crate::linalg::nnls_gram;
use num_complex::Complex64;

/// Pursuit options.
#[derive(Debug, Clone, Copy)]
pub struct BpdnParams {
    /// Contiguous delay bins selected per iteration.
    pub block_width: usize,
    /// Atoms below this fraction of the largest coefficient are dropped.
    pub drop_fraction: f64,
    pub max_iters: usize,
    /// Stop when the normalized mean-squared difference of successive
    /// estimates falls below this.
    pub kappa_tol: f64,
}

impl Default for BpdnParams {
    fn default() -> Self {
        Self { block_width: 5, drop_fraction: 0.05, max_iters: 32, kappa_tol: 1e-3 }
    }
}

/// Nonnegative PDP estimate with its support and convergence record.
#[derive(Debug, Clone)]
pub struct PdpEstimate {
    pub rho: Vec<f64>,
    pub support: Vec<usize>,
    pub kappa_trace: Vec<f64>,
    pub converged: bool,
}

impl PdpEstimate {
    pub fn total_mass(&self) -> f64 {
        self.rho.iter().sum()
    }
}

/// Circular convolution of a real sequence with a centered real kernel.
fn circ_conv_centered(x: &[f64], kernel: &[f64]) -> Vec<f64> {
    let n = x.len();
    let half = (kernel.len() - 1) / 2;
    let mut fx: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut fk = vec![Complex64::new(0.0, 0.0); n];
    for (i, &v) in kernel.iter().enumerate() {
        let r = i as i64 - half as i64;
        fk[r.rem_euclid(n as i64) as usize] += Complex64::new(v, 0.0);
    }
    fft_inplace(&mut fx);
    fft_inplace(&mut fk);
    for (a, b) in fx.iter_mut().zip(fk.iter()) {
        *a *= b;
    }
    ifft_inplace(&mut fx);
    fx.iter().map(|v| v.re / n as f64).collect()
}

/// Greedy block pursuit against the circulant kernel dictionary.
pub fn solve_pdp_bpdn(
    rho_eta: &[f64],
    kernel: &[f64],
    params: &BpdnParams,
) -> Result<PdpEstimate> {
    let n = rho_eta.len();
    if n == 0 {
        return Err(Error::InvalidConfig("empty intermediate PDP".into()));
    }
    let kernel_energy: f64 = kernel.iter().map(|v| v * v).sum();
    if kernel_energy <= 0.0 {
        return Err(Error::InvalidConfig("kernel energy must be positive".into()));
    }
    let half = (kernel.len() - 1) / 2;
    let block = params.block_width.max(1);

    // Gram entries between shifted atoms depend only on the shift
    // difference: the kernel's circular autocorrelation.
    let kernel_acf: Vec<f64> = {
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (i, &v) in kernel.iter().enumerate() {
            let r = i as i64 - half as i64;
            buf[r.rem_euclid(n as i64) as usize] += Complex64::new(v, 0.0);
        }
        fft_inplace(&mut buf);
        for v in &mut buf {
            *v = Complex64::new(v.norm_sqr(), 0.0);
        }
        ifft_inplace(&mut buf);
        buf.iter().map(|v| v.re / n as f64).collect()
    };
    // atom-observation correlations, one circular filtering pass
    let obs_corr = circ_conv_centered(rho_eta, kernel);

    let fit_on = |support: &[usize], max_iter: usize| -> Vec<f64> {
        let gram = |i: usize, j: usize| -> f64 {
            kernel_acf[(support[i] as i64 - support[j] as i64).rem_euclid(n as i64) as usize]
        };
        let rhs: Vec<f64> = support.iter().map(|&d| obs_corr[d]).collect();
        nnls_gram(&gram, &rhs, max_iter)
    };

    let mut support: Vec<usize> = Vec::new();
    let mut rho = vec![0.0f64; n];
    let mut kappa_trace = Vec::new();
    let mut converged = false;

    for _iter in 0..params.max_iters {
        // residual and its correlation with every shift of the kernel
        let fit = circ_conv_centered(&rho, kernel);
        let residual: Vec<f64> = rho_eta.iter().zip(fit.iter()).map(|(a, b)| a - b).collect();
        // symmetric kernel: correlation equals circular convolution
        let corr = circ_conv_centered(&residual, kernel);
        // best block by summed positive correlation
        let mut best_start = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        for start in 0..n {
            let mut s = 0.0;
            for j in 0..block {
                s += corr[(start + j) % n].max(0.0);
            }
            if s > best_score {
                best_score = s;
                best_start = start;
            }
        }
        for j in 0..block {
            let d = (best_start + j) % n;
            if !support.contains(&d) {
                support.push(d);
            }
        }

        // nonnegative fit on the accumulated support
        let mut coeffs = fit_on(&support, 4 * support.len() + 16);
        // backtracking: drop collapsed atoms and refit
        let peak = coeffs.iter().cloned().fold(0.0, f64::max);
        if peak > 0.0 {
            let keep: Vec<bool> =
                coeffs.iter().map(|&c| c >= params.drop_fraction * peak).collect();
            if keep.iter().any(|&k| !k) {
                support = support
                    .iter()
                    .zip(keep.iter())
                    .filter_map(|(&d, &k)| k.then_some(d))
                    .collect();
                coeffs = fit_on(&support, 4 * support.len() + 16);
            }
        }

        let mut next = vec![0.0f64; n];
        for (&d, &c) in support.iter().zip(coeffs.iter()) {
            next[d] = c;
        }
        let diff: f64 = next.iter().zip(rho.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        let norm: f64 = next.iter().map(|v| v * v).sum();
        let kappa = if norm > 0.0 { diff / norm } else { 1.0 };
        kappa_trace.push(kappa);
        rho = next;
        if kappa < params.kappa_tol {
            converged = true;
            break;
        }
    }

    let support: Vec<usize> = (0..n).filter(|&i| rho[i] > 0.0).collect();
    Ok(PdpEstimate { rho, support, kappa_trace, converged })
}

/// Run the pursuit on a delay grid decimated by `factor` (sum-pooled),
/// then expand the estimate back to the fine grid. The smoothing stage
/// that follows is wider than any sensible decimation, so support
/// discovery loses nothing while the pursuit cost drops by the factor
/// squared. `factor = 1` is the plain solver.
pub fn solve_pdp_bpdn_decimated(
    rho_eta: &[f64],
    kernel: &[f64],
    params: &BpdnParams,
    factor: usize,
) -> Result<PdpEstimate> {
    let factor = factor.max(1);
    if factor == 1 || rho_eta.len() % factor != 0 {
        return solve_pdp_bpdn(rho_eta, kernel, params);
    }
    let pool = |x: &[f64]| -> Vec<f64> {
        x.chunks(factor).map(|c| c.iter().sum()).collect()
    };
    let coarse_obs = pool(rho_eta);
    // pool the kernel around its center so it stays odd-length
    let half = (kernel.len() - 1) / 2;
    let coarse_half = half.div_ceil(factor);
    let mut coarse_kernel = vec![0.0f64; 2 * coarse_half + 1];
    for (i, &v) in kernel.iter().enumerate() {
        let r = i as i64 - half as i64;
        let cr = r.div_euclid(factor as i64) + coarse_half as i64;
        if cr >= 0 && (cr as usize) < coarse_kernel.len() {
            coarse_kernel[cr as usize] += v;
        }
    }
    let coarse = solve_pdp_bpdn(&coarse_obs, &coarse_kernel, params)?;
    let mut rho = vec![0.0f64; rho_eta.len()];
    for (c, &v) in coarse.rho.iter().enumerate() {
        if v > 0.0 {
            for f in 0..factor {
                rho[c * factor + f] = v / factor as f64;
            }
        }
    }
    let support = (0..rho.len()).filter(|&i| rho[i] > 0.0).collect();
    Ok(PdpEstimate {
        rho,
        support,
        kappa_trace: coarse.kappa_trace,
        converged: coarse.converged,
    })
}

/// Keep only the strongest support bins covering `keep_mass` of the total,
/// dropping stray low-mass islands the pursuit picked up from residual
/// ripple. The trimmed bins are zeroed.
pub fn trim_support_mass(pdp: &PdpEstimate, keep_mass: f64) -> PdpEstimate {
    let total: f64 = pdp.rho.iter().sum();
    if total <= 0.0 {
        return pdp.clone();
    }
    let mut order: Vec<usize> = pdp.support.clone();
    order.sort_by(|&a, &b| pdp.rho[b].partial_cmp(&pdp.rho[a]).unwrap());
    let mut rho = vec![0.0; pdp.rho.len()];
    let mut acc = 0.0;
    for &i in &order {
        if acc >= keep_mass * total {
            break;
        }
        rho[i] = pdp.rho[i];
        acc += pdp.rho[i];
    }
    let support = (0..rho.len()).filter(|&i| rho[i] > 0.0).collect();
    PdpEstimate {
        rho,
        support,
        kappa_trace: pdp.kappa_trace.clone(),
        converged: pdp.converged,
    }
}

/// Fill interior support gaps no wider than `max_gap` bins.
///
/// A static dense delay cluster reaches the pilot-based PDP through a
/// coherent interference pattern, so the pursuit sees bright fringes with
/// dim bins between them even though the channel is active across the
/// whole run. Missing an active tap aliases its energy onto the included
/// ones during the pruned estimation, which costs far more than carrying
/// the filled bins. Filled bins receive a floor value of 1e-4 of the peak.
pub fn fill_support_gaps(pdp: &PdpEstimate, max_gap: usize) -> PdpEstimate {
    let mut rho = pdp.rho.clone();
    let peak = rho.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 || pdp.support.len() < 2 {
        return pdp.clone();
    }
    let floor = 1e-4 * peak;
    let mut sorted = pdp.support.clone();
    sorted.sort_unstable();
    for w in sorted.windows(2) {
        let gap = w[1] - w[0];
        if gap > 1 && gap <= max_gap + 1 {
            for bin in w[0] + 1..w[1] {
                if rho[bin] < floor {
                    rho[bin] = floor;
                }
            }
        }
    }
    let support = (0..rho.len()).filter(|&i| rho[i] > 0.0).collect();
    PdpEstimate {
        rho,
        support,
        kappa_trace: pdp.kappa_trace.clone(),
        converged: pdp.converged,
    }
}

/// Squared matched-response kernel for the pursuit dictionary, truncated
/// to two symbol intervals per side (the raised-cosine envelope is below
/// 1e-3 there).
pub fn matched_power_kernel(
    bank: &crate::pulse::PulseBank,
    cfg: &crate::config::WaveformConfig,
) -> Vec<f64> {
    let center = bank.eta_center();
    let half = (2 * cfg.samples_per_symbol()).min(center);
    (center - half..=center + half).map(|i| bank.eta[i].norm_sqr()).collect()
}

/// Smooth a PDP with a unit-mass Gaussian kernel (100 us total duration,
/// 22 us two-sigma width) and recompute the support above 1e-3 of the peak.
pub fn smooth_pdp(pdp: &PdpEstimate, sample_rate: f64) -> PdpEstimate {
    let sigma = 11e-6 * sample_rate;
    let half = ((50e-6 * sample_rate).floor() as usize).max(1);
    let mut kernel: Vec<f64> = (-(half as i64)..=half as i64)
        .map(|j| {
            let z = j as f64 / sigma.max(1e-12);
            (-0.5 * z * z).exp()
        })
        .collect();
    let total: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= total;
    }
    let mut rho = circ_conv_centered(&pdp.rho, &kernel);
    // FFT rounding can leave tiny negative values
    for v in &mut rho {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let peak = rho.iter().cloned().fold(0.0, f64::max);
    let support = (0..rho.len()).filter(|&i| rho[i] > 1e-3 * peak).collect();
    PdpEstimate {
        rho,
        support,
        kappa_trace: pdp.kappa_trace.clone(),
        converged: pdp.converged,
    }
}
