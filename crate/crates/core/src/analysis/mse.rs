use crate::error::{Error, Result};
use crate::estimator::{estimate_range, EstimatorConfig};
use crate::model::Model;
use crate::scalar::Real;

use super::diagnostics::least_squares_slope;

#[derive(Debug, Clone, PartialEq)]
pub struct MseStudy<T> {
    pub truth: T,
    pub estimates: Vec<T>,
    pub mse: T,
    /// Mean total cost units per run.
    pub mean_cost: f64,
}

pub fn mean_squared_error<T: Real>(estimates: &[T], truth: T) -> Result<T> {
    if estimates.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let sum: T = estimates.iter().map(|&e| (e - truth) * (e - truth)).sum();
    Ok(sum / T::of_usize(estimates.len()))
}

/// MSE of `runs` independent estimates produced by `run_estimate(r)`, `r = 0..runs`.
pub fn mse_of_runs<T: Real, F>(truth: T, runs: u64, mut run_estimate: F) -> Result<MseStudy<T>>
where
    F: FnMut(u64) -> Result<(T, f64)>,
{
    if runs < 2 {
        return Err(Error::invalid("runs", format!("need at least 2 runs, got {runs}")));
    }
    let mut estimates = Vec::with_capacity(runs as usize);
    let mut cost = 0.0;
    for r in 0..runs {
        let (e, c) = run_estimate(r)?;
        estimates.push(e);
        cost += c;
    }
    let mse = mean_squared_error(&estimates, truth)?;
    Ok(MseStudy {
        truth,
        estimates,
        mse,
        mean_cost: cost / runs as f64,
    })
}

/// Independent runs of `M` replicates each: run `r` uses replicate ids
/// `first_id + r·M .. first_id + (r+1)·M`, so runs never share streams.
#[allow(clippy::too_many_arguments)]
pub fn mse_study<T: Real, F>(
    model: &Model<T>,
    config: &EstimatorConfig,
    phi: F,
    truth: T,
    replicates: u64,
    runs: u64,
    master_seed: u64,
    first_id: u64,
) -> Result<MseStudy<T>>
where
    F: Fn(&[T]) -> T + Sync,
{
    if replicates == 0 {
        return Err(Error::invalid("replicates", "need at least one replicate per run"));
    }
    mse_of_runs(truth, runs, |r| {
        let start = first_id + r * replicates;
        let est = estimate_range(model, config, &phi, master_seed, start..start + replicates)?;
        Ok((est.mean, est.total_cost))
    })
}

/// MSE curve from per-run replicate values: the estimate of size `M` in run
/// `r` is the mean of the first `M` values of `runs[r]`.
pub fn prefix_mse_curve<T: Real>(runs: &[Vec<T>], sizes: &[usize], truth: T) -> Result<Vec<(usize, T)>> {
    if runs.len() < 2 {
        return Err(Error::invalid("runs", format!("need at least 2 runs, got {}", runs.len())));
    }
    sizes
        .iter()
        .map(|&m| {
            if m == 0 || runs.iter().any(|v| v.len() < m) {
                return Err(Error::invalid("replicates", format!("prefix size {m} not available")));
            }
            let est: Vec<T> = runs
                .iter()
                .map(|v| v[..m].iter().copied().sum::<T>() / T::of_usize(m))
                .collect();
            Ok((m, mean_squared_error(&est, truth)?))
        })
        .collect()
}

/// Slope of `log(mse)` against `log(cost)`.
pub fn log_log_slope(cost: &[f64], mse: &[f64]) -> Option<f64> {
    if cost.iter().chain(mse).any(|&v| !(v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = cost.iter().map(|c| c.ln()).collect();
    let ly: Vec<f64> = mse.iter().map(|m| m.ln()).collect();
    least_squares_slope(&lx, &ly)
}
