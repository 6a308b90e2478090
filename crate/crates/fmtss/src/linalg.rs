//! Small dense solvers used by the estimator: a complex Hermitian
//! positive-definite solve and a nonnegative least-squares routine.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Hermitian positive-definite matrix in row-major order.
pub struct HermitianMatrix {
    pub n: usize,
    pub data: Vec<Complex64>,
}

impl HermitianMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.n + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.n + c] = v;
    }

    /// Solve `A x = b` by Cholesky factorization. Consumes the matrix.
    pub fn solve(mut self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: b.len() });
        }
        // in-place lower Cholesky: A = L L^H
        for j in 0..n {
            let mut diag = self.at(j, j).re;
            for k in 0..j {
                diag -= self.at(j, k).norm_sqr();
            }
            if diag <= 0.0 || !diag.is_finite() {
                return Err(Error::Infeasible(format!(
                    "matrix not positive definite at pivot {j} ({diag:.3e})"
                )));
            }
            let ljj = diag.sqrt();
            self.set(j, j, Complex64::new(ljj, 0.0));
            for i in j + 1..n {
                let mut v = self.at(i, j);
                for k in 0..j {
                    v -= self.at(i, k) * self.at(j, k).conj();
                }
                self.set(i, j, v / ljj);
            }
        }
        // L y = b
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                let lik = self.at(i, k);
                y[i] = y[i] - lik * y[k];
            }
            y[i] /= self.at(i, i).re;
        }
        // L^H x = y
        for i in (0..n).rev() {
            for k in i + 1..n {
                let lki = self.at(k, i).conj();
                y[i] = y[i] - lki * y[k];
            }
            y[i] /= self.at(i, i).re;
        }
        Ok(y)
    }
}

/// Dense complex least squares via Householder QR.
///
/// `matrix` is row-major with `rows x cols` entries, `rows >= cols`.
/// Solving the stacked system directly avoids squaring the condition
/// number the way normal equations do.
pub struct LeastSquares {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
    pub rhs: Vec<Complex64>,
}

impl LeastSquares {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
            rhs: vec![Complex64::new(0.0, 0.0); rows],
        }
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    /// Minimize ||A x - b||_2. Consumes the system.
    pub fn solve(mut self) -> Result<Vec<Complex64>> {
        let m = self.rows;
        let n = self.cols;
        if m < n {
            return Err(Error::Infeasible(format!("underdetermined system {m} x {n}")));
        }
        let lead = n;
        for k in 0..n {
            // Householder reflector for column k below row k
            let mut norm_sq = 0.0f64;
            for r in k..m {
                norm_sq += self.data[r * lead + k].norm_sqr();
            }
            let norm = norm_sq.sqrt();
            if norm < 1e-300 {
                return Err(Error::Infeasible(format!("rank deficiency at column {k}")));
            }
            let pivot = self.data[k * lead + k];
            let alpha = if pivot.norm() > 0.0 {
                -(pivot / pivot.norm()) * norm
            } else {
                Complex64::new(-norm, 0.0)
            };
            // v = x - alpha e_k, applied implicitly
            let mut v = vec![Complex64::new(0.0, 0.0); m - k];
            v[0] = pivot - alpha;
            for r in k + 1..m {
                v[r - k] = self.data[r * lead + k];
            }
            let v_norm_sq: f64 = v.iter().map(|x| x.norm_sqr()).sum();
            if v_norm_sq < 1e-300 {
                continue;
            }
            let beta = 2.0 / v_norm_sq;
            // apply to remaining columns
            for c in k..n {
                let mut dot = Complex64::new(0.0, 0.0);
                for r in k..m {
                    dot += v[r - k].conj() * self.data[r * lead + c];
                }
                dot *= beta;
                for r in k..m {
                    let update = v[r - k] * dot;
                    self.data[r * lead + c] -= update;
                }
            }
            // apply to the right-hand side
            let mut dot = Complex64::new(0.0, 0.0);
            for r in k..m {
                dot += v[r - k].conj() * self.rhs[r];
            }
            dot *= beta;
            for r in k..m {
                self.rhs[r] -= v[r - k] * dot;
            }
        }
        // back substitution on the upper-triangular factor
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for k in (0..n).rev() {
            let mut acc = self.rhs[k];
            for c in k + 1..n {
                acc -= self.data[k * lead + c] * x[c];
            }
            let diag = self.data[k * lead + k];
            if diag.norm() < 1e-300 {
                return Err(Error::Infeasible(format!("singular pivot at column {k}")));
            }
            x[k] = acc / diag;
        }
        Ok(x)
    }
}

/// Nonnegative least squares: minimize ||A x - b|| subject to x >= 0.
///
/// `columns` holds the active dictionary atoms (each of length `m`).
/// Convenience wrapper over [`nnls_gram`] for explicit columns.
pub fn nnls(columns: &[Vec<f64>], b: &[f64], max_iter: usize) -> Vec<f64> {
    let n = columns.len();
    if n == 0 {
        return Vec::new();
    }
    let gram = |i: usize, j: usize| -> f64 {
        columns[i].iter().zip(columns[j].iter()).map(|(x, y)| x * y).sum()
    };
    let rhs: Vec<f64> = columns
        .iter()
        .map(|col| col.iter().zip(b.iter()).map(|(x, y)| x * y).sum())
        .collect();
    nnls_gram(&gram, &rhs, max_iter)
}

/// Nonnegative least squares in normal-equation form: the problem is
/// specified by the Gram lookup `gram(i, j) = <a_i, a_j>` and the
/// correlations `rhs[i] = <a_i, b>`. Classic active-set iteration.
pub fn nnls_gram(gram: &dyn Fn(usize, usize) -> f64, rhs: &[f64], max_iter: usize) -> Vec<f64> {
    let n = rhs.len();
    if n == 0 {
        return Vec::new();
    }
    let mut x = vec![0.0f64; n];
    let mut passive = vec![false; n];
    let tol = 1e-10 * rhs.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);

    // gradient of 1/2||Ax-b||^2 is G x - rhs; we track w = rhs - G x
    let gradient = |x: &[f64]| -> Vec<f64> {
        let mut w = rhs.to_vec();
        for j in 0..n {
            if x[j] != 0.0 {
                for (i, wi) in w.iter_mut().enumerate() {
                    *wi -= gram(i, j) * x[j];
                }
            }
        }
        w
    };

    for _ in 0..max_iter {
        let w = gradient(&x);
        let mut best = -1isize;
        let mut best_w = tol;
        for j in 0..n {
            if !passive[j] && w[j] > best_w {
                best_w = w[j];
                best = j as isize;
            }
        }
        if best < 0 {
            break;
        }
        passive[best as usize] = true;

        // inner loop: unconstrained LS on the passive set, stepping back
        // whenever a coefficient would go negative
        loop {
            let active: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let z = ls_on_gram(gram, rhs, &active);
            if z.iter().all(|&v| v > 0.0) {
                for (idx, &j) in active.iter().enumerate() {
                    x[j] = z[idx];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (idx, &j) in active.iter().enumerate() {
                if z[idx] <= 0.0 {
                    let denom = x[j] - z[idx];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (idx, &j) in active.iter().enumerate() {
                x[j] += alpha * (z[idx] - x[j]);
                if x[j] <= 1e-14 {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if active.iter().all(|&j| !passive[j]) {
                break;
            }
        }
    }
    x
}

fn ls_on_gram(gram: &dyn Fn(usize, usize) -> f64, rhs: &[f64], active: &[usize]) -> Vec<f64> {
    let p = active.len();
    if p == 0 {
        return Vec::new();
    }
    // normal equations G z = c with a ridge of 1e-12 on the diagonal
    let mut g = vec![0.0f64; p * p];
    let mut c = vec![0.0f64; p];
    for (a, &ja) in active.iter().enumerate() {
        c[a] = rhs[ja];
        for (bb, &jb) in active.iter().enumerate().skip(a) {
            let dot = gram(ja, jb);
            g[a * p + bb] = dot;
            g[bb * p + a] = dot;
        }
    }
    let ridge = 1e-12 * (0..p).map(|i| g[i * p + i]).fold(0.0, f64::max).max(1e-300);
    for i in 0..p {
        g[i * p + i] += ridge;
    }
    // real Cholesky
    for j in 0..p {
        let mut d = g[j * p + j];
        for k in 0..j {
            d -= g[j * p + k] * g[j * p + k];
        }
        let d = d.max(1e-300).sqrt();
        g[j * p + j] = d;
        for i in j + 1..p {
            let mut v = g[i * p + j];
            for k in 0..j {
                v -= g[i * p + k] * g[j * p + k];
            }
            g[i * p + j] = v / d;
        }
    }
    let mut z = c;
    for i in 0..p {
        for k in 0..i {
            z[i] -= g[i * p + k] * z[k];
        }
        z[i] /= g[i * p + i];
    }
    for i in (0..p).rev() {
        for k in i + 1..p {
            z[i] -= g[k * p + i] * z[k];
        }
        z[i] /= g[i * p + i];
    }
    z
}
