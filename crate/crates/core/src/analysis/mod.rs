//! Post-processing of estimator output: kernel density estimates, quadrature,
//! 1-D Wasserstein distances, contraction diagnostics and MSE studies.

mod diagnostics;
mod kde;
mod mse;
mod quadrature;
mod wasserstein;

pub use diagnostics::{contraction_diagnostic, decay_rate, least_squares_slope};
pub use kde::{gaussian_kernel, kde, uniform_grid, DensityEstimate, PooledAtoms};
pub use mse::{log_log_slope, mean_squared_error, mse_of_runs, mse_study, prefix_mse_curve, MseStudy};
pub use quadrature::{adaptive_simpson, trapezoid, CurieWeissReference};
pub use wasserstein::wasserstein_1d;

use crate::error::{Error, Result};
use crate::estimator::SignedEmpiricalMeasure;
use crate::scalar::Real;

/// `Σ_j w_j x_j[component]^k`.
pub fn moment<T: Real>(measure: &SignedEmpiricalMeasure<T>, component: usize, k: i32) -> Result<T> {
    if component >= measure.dim() {
        return Err(Error::Domain(format!(
            "component {component} outside dimension {}",
            measure.dim()
        )));
    }
    Ok(measure.evaluate(|x| x[component].powi(k)))
}
