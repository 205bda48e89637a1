//! Numerical checks of the convergence, stability and regret theory.

mod blockkron;
mod regret;
mod rzz;
mod stability;

pub use blockkron::{block_kron, unvecbr, vecbr, BlockMatrix};
pub use regret::{batch_comparator, empirical_regret, COMPARATOR_ITERS};
pub use rzz::{mean_convergence_bound, rzz_closed_form, rzz_monte_carlo, theta_opt, MeanBound};
pub use stability::{
    covariance_recursion_step, covariance_step_vectorized, largest_eigenvalue_psd, ms_operator, ms_stability_check,
    spectral_radius, steady_state_mse, IterateOptions, IteratedSteadyState, StabilityReport, SteadyState,
    DEFAULT_MS_CAP, STABILITY_MARGIN,
};

/// Ascending eigenvalues of a symmetric matrix.
pub fn symmetric_eigenvalues(r: &nalgebra::DMatrix<f64>) -> crate::Result<Vec<f64>> {
    rzz::check_symmetric(r)?;
    Ok(rzz::sorted_eigenvalues(r))
}
