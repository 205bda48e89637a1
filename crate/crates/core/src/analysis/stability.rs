//! Mean and mean-square stability of RFF-DKLMS and the single-node
//! steady-state MSE model.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::blockkron::{block_kron, vecbr, BlockMatrix};
use super::rzz::check_symmetric;
use crate::error::{Error, Result};

/// Default cap on `K·D` for the mean-square operator, which has `(KD)²` rows.
pub const DEFAULT_MS_CAP: usize = 64;

/// Radii within this margin of one count as unstable.
pub const STABILITY_MARGIN: f64 = 1e-10;

/// Largest matrix (rows) handed to the dense complex eigensolver.
const DENSE_EIG_LIMIT: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub mu_max_mean: f64,
    pub spectral_radius_ms: f64,
    pub stable_mean: bool,
    pub stable_ms: bool,
}

impl fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mu_max_mean={}", self.mu_max_mean)?;
        writeln!(f, "spectral_radius_ms={}", self.spectral_radius_ms)?;
        writeln!(f, "stable_mean={}", u8::from(self.stable_mean))?;
        write!(f, "stable_ms={}", u8::from(self.stable_ms))
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration (relative tolerance `1e-12`).
pub fn largest_eigenvalue_psd(r: &DMatrix<f64>) -> Result<f64> {
    check_symmetric(r)?;
    let n = r.nrows();
    let mut v = DVector::from_fn(n, |i, _| 1.0 + ((i * 7919) % 101) as f64 / 101.0);
    v /= v.norm();
    let mut est = 0.0;
    for _ in 0..100_000 {
        let w = r * &v;
        let lam = v.dot(&w);
        let nw = w.norm();
        if nw == 0.0 {
            return Ok(0.0);
        }
        v = w / nw;
        if (lam - est).abs() <= 1e-12 * lam.abs() {
            return Ok(lam);
        }
        est = lam;
    }
    Err(Error::Numerical("power iteration did not converge".into()))
}

/// Spectral radius of a general square matrix: complex Schur eigenvalues for
/// moderate sizes, else power iteration on `‖M^k v‖`.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() != m.ncols() || m.is_empty() {
        return Err(Error::param("spectral radius needs a non-empty square matrix"));
    }
    if m.nrows() <= DENSE_EIG_LIMIT {
        let ev = m.clone().complex_eigenvalues();
        return Ok(ev.iter().map(|c| c.norm()).fold(0.0, f64::max));
    }
    power_radius(m)
}

/// Geometric-mean growth of `‖M v‖` over blocks of doubling length, until
/// two consecutive block estimates agree to `1e-9` relative.
fn power_radius(m: &DMatrix<f64>) -> Result<f64> {
    let n = m.nrows();
    let mut v = DVector::from_fn(n, |i, _| 1.0 + ((i * 104_729) % 997) as f64 / 997.0);
    v /= v.norm();
    let mut steps = 0usize;
    let mut prev = f64::NAN;
    let mut block = 64usize;
    while steps < 1 << 16 {
        let mut block_log = 0.0;
        for _ in 0..block {
            let w = m * &v;
            let nw = w.norm();
            if nw == 0.0 {
                return Ok(0.0);
            }
            block_log += nw.ln();
            v = w / nw;
        }
        steps += block;
        let est = (block_log / block as f64).exp();
        if (est - prev).abs() <= 1e-9 * est {
            return Ok(est);
        }
        prev = est;
        block *= 2;
    }
    Ok(prev)
}

/// The mean-square operator `(I − μ(R ⊠ I + I ⊠ R))(A ⊠ A)` on `vecbr` of a
/// `KD × KD` covariance partitioned into `D × D` blocks.
pub fn ms_operator(r: &BlockMatrix, a_big: &DMatrix<f64>, mu: f64) -> Result<DMatrix<f64>> {
    let n = r.dense().nrows();
    if r.dense().ncols() != n || a_big.shape() != (n, n) {
        return Err(Error::param("R and A must be square of the same size"));
    }
    let (bd, _) = r.block_shape();
    let eye = DMatrix::<f64>::identity(n, n);
    let eye_b = BlockMatrix::from_dense(eye.clone(), bd, bd)?;
    let a_b = BlockMatrix::from_dense(a_big.clone(), bd, bd)?;
    let r_i = block_kron(r.dense(), &eye_b)?.into_dense();
    let i_r = block_kron(&eye, r)?.into_dense();
    let a_a = block_kron(a_big, &a_b)?.into_dense();
    let big = DMatrix::<f64>::identity(n * n, n * n) - (r_i + i_r) * mu;
    Ok(big * a_a)
}

/// Mean stability (`0 < μ < 2/λ_max(R)`) and mean-square stability
/// (spectral radius of [`ms_operator`] below one).
pub fn ms_stability_check(r: &BlockMatrix, a_big: &DMatrix<f64>, mu: f64, cap: usize) -> Result<StabilityReport> {
    let n = r.dense().nrows();
    if n > cap {
        return Err(Error::Size(format!("K·D = {n} exceeds the mean-square cap {cap}")));
    }
    check_symmetric(r.dense())?;
    let lmax = *super::rzz::sorted_eigenvalues(r.dense()).last().expect("non-empty");
    let mu_max_mean = 2.0 / lmax;
    let radius = spectral_radius(&ms_operator(r, a_big, mu)?)?;
    Ok(StabilityReport {
        mu_max_mean,
        spectral_radius_ms: radius,
        stable_mean: mu > 0.0 && mu < mu_max_mean,
        stable_ms: radius < 1.0 - STABILITY_MARGIN,
    })
}

/// `B_n = A B Aᵀ − μ A B Aᵀ R − μ R A B Aᵀ + μ² σ_η² R`.
pub fn covariance_recursion_step(
    b: &BlockMatrix,
    a_big: &DMatrix<f64>,
    r: &BlockMatrix,
    mu: f64,
    sigma_eta: f64,
) -> Result<BlockMatrix> {
    let n = b.dense().nrows();
    if b.dense().ncols() != n || a_big.shape() != (n, n) || r.dense().shape() != (n, n) {
        return Err(Error::param("B, A and R must be square of the same size"));
    }
    let aba = a_big * b.dense() * a_big.transpose();
    let rd = r.dense();
    let next = &aba - (&aba * rd) * mu - (rd * &aba) * mu + rd * (mu * mu * sigma_eta * sigma_eta);
    let (br, bc) = b.block_shape();
    BlockMatrix::from_dense(next, br, bc)
}

/// One step through the vectorized operator, for comparison with
/// [`covariance_recursion_step`].
pub fn covariance_step_vectorized(
    b: &BlockMatrix,
    a_big: &DMatrix<f64>,
    r: &BlockMatrix,
    mu: f64,
    sigma_eta: f64,
) -> Result<DVector<f64>> {
    let op = ms_operator(r, a_big, mu)?;
    Ok(op * vecbr(b) + vecbr(r) * (mu * mu * sigma_eta * sigma_eta))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IteratedSteadyState {
    pub mse: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `tr(R A_n) + σ_η²` for `n = 0, 1, ...` when requested.
    pub trajectory: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    /// `σ_η² (1 + (μ/2) tr R)`.
    pub mse: f64,
    pub iterated: Option<IteratedSteadyState>,
}

/// Iteration controls for [`steady_state_mse`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub keep_trajectory: bool,
}

impl Default for IterateOptions {
    fn default() -> Self {
        IterateOptions { tol: 1e-12, max_iter: 1_000_000, keep_trajectory: false }
    }
}

/// Steady-state MSE of single-node RFF-KLMS from
/// `A_{n+1} = A_n − μ(R A_n + A_n R) + μ² σ_η² R`, `A_0 = 0`.
///
/// The fixed point `A_∞ = (μσ_η²/2) I` gives the closed form. When `iterate`
/// is set the recursion is also run, in the eigenbasis of `R` where it is
/// diagonal, until the Frobenius step falls below `tol`.
pub fn steady_state_mse(
    r: &DMatrix<f64>,
    mu: f64,
    sigma_eta: f64,
    iterate: Option<IterateOptions>,
) -> Result<SteadyState> {
    check_symmetric(r)?;
    let s2 = sigma_eta * sigma_eta;
    let closed = s2 * (1.0 + 0.5 * mu * r.trace());
    let lmax = match iterate {
        Some(_) => None,
        None => Some(largest_eigenvalue_psd(r)?),
    };
    let iterated = match iterate {
        None => None,
        Some(opts) => {
            let eig = SymmetricEigen::new(r.clone());
            let lam: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            check_step(mu, lam.iter().copied().fold(f64::MIN, f64::max))?;
            Some(iterate_diagonal(&lam, mu, s2, opts))
        }
    };
    if let Some(l) = lmax {
        check_step(mu, l)?;
    }
    Ok(SteadyState { mse: closed, iterated })
}

fn check_step(mu: f64, lmax: f64) -> Result<()> {
    if !(mu > 0.0 && mu < 1.0 / lmax) {
        return Err(Error::param(format!("step {mu} outside the stable range (0, 1/λ_max = {})", 1.0 / lmax)));
    }
    Ok(())
}

fn iterate_diagonal(lam: &[f64], mu: f64, s2: f64, opts: IterateOptions) -> IteratedSteadyState {
    let mut a = vec![0.0; lam.len()];
    let mse_of = |a: &[f64]| lam.iter().zip(a).map(|(l, x)| l * x).sum::<f64>() + s2;
    let mut trajectory = opts.keep_trajectory.then(|| vec![mse_of(&a)]);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let mut step2 = 0.0;
        for (x, &l) in a.iter_mut().zip(lam) {
            let next = *x - 2.0 * mu * l * *x + mu * mu * s2 * l;
            step2 += (next - *x) * (next - *x);
            *x = next;
        }
        iterations += 1;
        if let Some(t) = trajectory.as_mut() {
            t.push(mse_of(&a));
        }
        if step2.sqrt() < opts.tol {
            converged = true;
            break;
        }
    }
    IteratedSteadyState { mse: mse_of(&a), iterations, converged, trajectory }
}
