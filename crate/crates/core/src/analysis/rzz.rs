//! The feature autocorrelation `R_zz = E[z(x) z(x)ᵀ]` for Gaussian inputs and
//! the quantities derived from it.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::features::FeatureMap;
use crate::rng::seeded_rng;

fn check_sigma_x(sigma_x: f64) -> Result<()> {
    if !(sigma_x > 0.0 && sigma_x.is_finite()) {
        return Err(Error::param(format!("input scale must be positive, got {sigma_x}")));
    }
    Ok(())
}

/// `R_zz` for `x ~ N(0, σ_x² I_d)`:
///
/// ```text
/// r_ij = (2/D)·[½ e^{−‖ω_i−ω_j‖² σ_x²/2} cos(b_i − b_j) + ½ e^{−‖ω_i+ω_j‖² σ_x²/2} cos(b_i + b_j)]
/// ```
pub fn rzz_closed_form(map: &FeatureMap, sigma_x: f64) -> Result<DMatrix<f64>> {
    check_sigma_x(sigma_x)?;
    let dd = map.dim_out();
    let s2 = sigma_x * sigma_x;
    let scale = 1.0 / dd as f64;
    let mut r = DMatrix::zeros(dd, dd);
    for i in 0..dd {
        let (wi, bi) = (map.omega(i), map.phase(i));
        for j in i..dd {
            let (wj, bj) = (map.omega(j), map.phase(j));
            let (mut minus, mut plus) = (0.0, 0.0);
            for (a, b) in wi.iter().zip(wj) {
                minus += (a - b) * (a - b);
                plus += (a + b) * (a + b);
            }
            let v = scale * ((-minus * s2 / 2.0).exp() * (bi - bj).cos() + (-plus * s2 / 2.0).exp() * (bi + bj).cos());
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    Ok(r)
}

/// Sample mean of `z(x) z(x)ᵀ` over `n_samples` draws of `x ~ N(0, σ_x² I_d)`.
pub fn rzz_monte_carlo(map: &FeatureMap, sigma_x: f64, n_samples: usize, seed: u64) -> Result<DMatrix<f64>> {
    check_sigma_x(sigma_x)?;
    if n_samples == 0 {
        return Err(Error::param("Monte Carlo estimate needs at least one sample"));
    }
    let dd = map.dim_out();
    let mut rng = seeded_rng(seed);
    let mut x = vec![0.0; map.dim_in()];
    let mut z = DVector::zeros(dd);
    let mut acc = DMatrix::zeros(dd, dd);
    for _ in 0..n_samples {
        x.iter_mut().for_each(|v| *v = sigma_x * rng.sample::<f64, _>(StandardNormal));
        map.transform_into(&x, z.as_mut_slice())?;
        acc.syger(1.0, &z, &z, 1.0);
    }
    acc.fill_upper_triangle_with_lower_triangle();
    Ok(acc / n_samples as f64)
}

/// `θ_o = Σ_m a_m z(c_m)`, the feature-space image of a kernel expansion.
pub fn theta_opt(map: &FeatureMap, centers: &[Vec<f64>], coeffs: &[f64]) -> Result<Vec<f64>> {
    if centers.is_empty() {
        return Err(Error::param("expansion must be non-empty"));
    }
    check_dim("expansion coefficients", centers.len(), coeffs.len())?;
    let mut theta = vec![0.0; map.dim_out()];
    let mut z = vec![0.0; map.dim_out()];
    for (c, a) in centers.iter().zip(coeffs) {
        map.transform_into(c, &mut z)?;
        for (t, zi) in theta.iter_mut().zip(&z) {
            *t += a * zi;
        }
    }
    Ok(theta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanBound {
    /// `2/λ_max`.
    pub mu_max: f64,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
}

/// Mean-convergence step bound `μ_max = 2/λ_max(R)` with the full spectrum.
pub fn mean_convergence_bound(r: &DMatrix<f64>) -> Result<MeanBound> {
    check_symmetric(r)?;
    let eigenvalues = sorted_eigenvalues(r);
    let lmax = *eigenvalues.last().expect("square matrix is non-empty");
    if !(lmax > 0.0) {
        return Err(Error::Numerical(format!("largest eigenvalue {lmax} is not positive")));
    }
    Ok(MeanBound { mu_max: 2.0 / lmax, eigenvalues })
}

pub(crate) fn check_symmetric(r: &DMatrix<f64>) -> Result<()> {
    if r.nrows() != r.ncols() || r.nrows() == 0 {
        return Err(Error::param(format!("expected a non-empty square matrix, got {}x{}", r.nrows(), r.ncols())));
    }
    let tol = 1e-12 * r.amax().max(1.0);
    if (r - r.transpose()).amax() > tol {
        return Err(Error::param("matrix is not symmetric"));
    }
    Ok(())
}

pub(crate) fn sorted_eigenvalues(r: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(r.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}
