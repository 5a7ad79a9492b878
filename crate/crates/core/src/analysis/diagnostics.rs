use crate::error::{Error, Result};
use crate::model::Model;
use crate::particle::{propagate_block, EmpiricalMeasure, LevelParams};
use crate::rng::{ReplicateKey, StreamRole};
use crate::scalar::Real;

use super::wasserstein::wasserstein_1d;

/// Runs two particle systems from the point masses `x0_a` and `x0_b` with
/// the same Brownian increments and records `(t, W_2(μ^a_t, μ^b_t))` for
/// `t = 1..=horizon`. Only one-dimensional models are supported.
pub fn contraction_diagnostic<T: Real>(
    model: &Model<T>,
    level: u32,
    particles: usize,
    horizon: u64,
    x0_a: T,
    x0_b: T,
    key: &ReplicateKey,
) -> Result<Vec<(u64, T)>> {
    if model.dim != 1 {
        return Err(Error::Unsupported(format!(
            "contraction diagnostic needs a 1-d model, {} has dimension {}",
            model.name, model.dim
        )));
    }
    let params = LevelParams::new(level);
    let mut a = EmpiricalMeasure::replicated(&[x0_a], particles)?;
    let mut b = EmpiricalMeasure::replicated(&[x0_b], particles)?;
    let mut out = Vec::with_capacity(horizon as usize);
    for t in 1..=horizon {
        let key = key.stream(StreamRole::ParticleFine, t);
        a = propagate_block(model, &params, &a, key)?.1;
        b = propagate_block(model, &params, &b, key)?.1;
        out.push((t, wasserstein_1d(a.as_slice(), b.as_slice(), 2)?));
    }
    Ok(out)
}

/// Least-squares slope of `y` against `x`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Exponential decay rate `r` fitted to `W_2(t)² ≈ C e^{−r t}` over the
/// strictly positive entries of a diagnostic series.
pub fn decay_rate<T: Real>(series: &[(u64, T)]) -> Option<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = series
        .iter()
        .map(|&(t, w)| (t as f64, w.to_f64_lossy()))
        .filter(|&(_, w)| w > 0.0 && w.is_finite())
        .map(|(t, w)| (t, (w * w).ln()))
        .unzip();
    least_squares_slope(&x, &y).map(|s| -s)
}
