use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::SignedEmpiricalMeasure;
use crate::scalar::Real;

use super::quadrature::trapezoid;

/// Density values on a 1-D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate<T> {
    pub grid: Vec<T>,
    pub values: Vec<T>,
    pub bandwidth: T,
}

impl<T: Real> DensityEstimate<T> {
    /// Trapezoid integral of the density over the grid.
    pub fn mass(&self) -> T {
        trapezoid(&self.grid, &self.values)
    }

    /// Trapezoid integral of `x · p(x)`.
    pub fn first_moment(&self) -> T {
        let xp: Vec<T> = self.grid.iter().zip(&self.values).map(|(&x, &p)| x * p).collect();
        trapezoid(&self.grid, &xp)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `sup_x |p̂(x) − f(x)|` over the grid.
    pub fn sup_distance<F: Fn(T) -> T>(&self, f: F) -> T {
        self.grid
            .iter()
            .zip(&self.values)
            .map(|(&x, &p)| (p - f(x)).abs())
            .fold(T::zero(), T::max)
    }
}

/// `K_h(u)`: the `N(0, h²)` density.
#[inline]
pub fn gaussian_kernel<T: Real>(u: T, h: T) -> T {
    let z = u / h;
    (-(z * z) / T::of(2.0)).exp() / (h * (T::PI() + T::PI()).sqrt())
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn uniform_grid<T: Real>(lo: T, hi: T, n: usize) -> Result<Vec<T>> {
    if n < 2 || !(hi > lo) {
        return Err(Error::Domain(format!(
            "grid needs n >= 2 and lo < hi (n={n}, lo={lo}, hi={hi})"
        )));
    }
    let step = (hi - lo) / T::of_usize(n - 1);
    Ok((0..n).map(|i| lo + step * T::of_usize(i)).collect())
}

fn check_bandwidth<T: Real>(h: T) -> Result<()> {
    if h > T::zero() && h.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("bandwidth must be positive, got {h}")))
    }
}

/// `p̂(x) = Σ_j w_j K_h(x − x_j[component])` on `grid`. Negative values are kept.
pub fn kde<T: Real>(
    measure: &SignedEmpiricalMeasure<T>,
    component: usize,
    h: T,
    grid: &[T],
) -> Result<DensityEstimate<T>> {
    check_bandwidth(h)?;
    if component >= measure.dim() {
        return Err(Error::Domain(format!(
            "component {component} outside dimension {}",
            measure.dim()
        )));
    }
    let values = grid
        .iter()
        .map(|&x| {
            measure
                .atoms()
                .map(|(p, w)| w * gaussian_kernel(x - p[component], h))
                .sum()
        })
        .collect();
    Ok(DensityEstimate {
        grid: grid.to_vec(),
        values,
        bandwidth: h,
    })
}

/// Weighted 1-D atoms pooled from many replicates: the average measure
/// `(1/M) Σ_i π̂^i` restricted to one coordinate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PooledAtoms<T> {
    pub positions: Vec<T>,
    pub weights: Vec<T>,
    replicates: usize,
}

impl<T: Real> PooledAtoms<T> {
    pub fn new() -> Self {
        PooledAtoms {
            positions: Vec::new(),
            weights: Vec::new(),
            replicates: 0,
        }
    }

    pub fn add(&mut self, measure: &SignedEmpiricalMeasure<T>, component: usize) {
        for (p, w) in measure.atoms() {
            self.positions.push(p[component]);
            self.weights.push(w);
        }
        self.replicates += 1;
    }

    pub fn add_atoms(&mut self, atoms: &[(T, T)]) {
        for &(x, w) in atoms {
            self.positions.push(x);
            self.weights.push(w);
        }
        self.replicates += 1;
    }

    pub fn replicates(&self) -> usize {
        self.replicates
    }

    /// Total weight of the averaged measure.
    pub fn total_weight(&self) -> T {
        self.weights.iter().copied().sum::<T>() / T::of_usize(self.replicates.max(1))
    }

    /// Grid covering every atom with `pad` bandwidths of margin and spacing at most `h / 4`.
    pub fn auto_grid(&self, h: T, pad: T, min_points: usize) -> Result<Vec<T>> {
        check_bandwidth(h)?;
        if self.positions.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        let lo = self.positions.iter().copied().fold(T::infinity(), T::min) - pad * h;
        let hi = self.positions.iter().copied().fold(T::neg_infinity(), T::max) + pad * h;
        let needed = ((hi - lo) / (h / T::of(4.0))).ceil().to_usize().unwrap_or(0) + 1;
        uniform_grid(lo, hi, needed.max(min_points))
    }

    /// KDE of the averaged measure.
    pub fn kde(&self, h: T, grid: &[T]) -> Result<DensityEstimate<T>> {
        check_bandwidth(h)?;
        if self.replicates == 0 {
            return Err(Error::EmptyMeasure);
        }
        let m = T::of_usize(self.replicates);
        let values = grid
            .par_iter()
            .map(|&x| {
                self.positions
                    .iter()
                    .zip(&self.weights)
                    .map(|(&p, &w)| w * gaussian_kernel(x - p, h))
                    .sum::<T>()
                    / m
            })
            .collect();
        Ok(DensityEstimate {
            grid: grid.to_vec(),
            values,
            bandwidth: h,
        })
    }
}
