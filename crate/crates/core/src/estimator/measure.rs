use crate::scalar::{dyadic, Real};

/// Weighted atoms `Σ_j w_j δ_{x_j}` times a common `scale`.
///
/// The raw weights are dyadic (`±2^-P`), so the raw mass of a replicate is
/// computed without rounding; the `1/(P_L(L)·P_P(P))` factor lives in `scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedEmpiricalMeasure<T> {
    dim: usize,
    points: Vec<T>,
    weights: Vec<T>,
    scale: T,
}

impl<T: Real> SignedEmpiricalMeasure<T> {
    pub fn new(dim: usize) -> Self {
        SignedEmpiricalMeasure {
            dim,
            points: Vec::new(),
            weights: Vec::new(),
            scale: T::one(),
        }
    }

    pub fn push(&mut self, point: &[T], weight: T) {
        assert_eq!(point.len(), self.dim, "atom dimension");
        self.points.extend_from_slice(point);
        self.weights.push(weight);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    /// Multiplies every weight by `factor`.
    pub fn scaled(mut self, factor: T) -> Self {
        self.scale *= factor;
        self
    }

    pub fn point(&self, j: usize) -> &[T] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }

    pub fn raw_weight(&self, j: usize) -> T {
        self.weights[j]
    }

    /// `(point, scale · w)` for every atom.
    pub fn atoms(&self) -> impl Iterator<Item = (&[T], T)> + '_ {
        self.points
            .chunks_exact(self.dim)
            .zip(&self.weights)
            .map(move |(p, &w)| (p, self.scale * w))
    }

    /// `Σ_j w_j` without the scale.
    pub fn raw_mass(&self) -> T {
        self.weights.iter().copied().sum()
    }

    pub fn total_weight(&self) -> T {
        self.scale * self.raw_mass()
    }

    /// `scale · Σ_j w_j φ(x_j)`.
    pub fn evaluate<F: Fn(&[T]) -> T>(&self, phi: F) -> T {
        let sum: T = self
            .points
            .chunks_exact(self.dim)
            .zip(&self.weights)
            .map(|(p, &w)| w * phi(p))
            .sum();
        self.scale * sum
    }
}

/// Raw atom weights for a path `u_1, …, u_{I_P}`: `1` when `P = 0`, otherwise
/// `1/I_P − 1/I_{P−1}` on the first `I_{P−1}` atoms and `1/I_P` on the rest.
pub fn prefix_weights<T: Real>(p: u32) -> Vec<T> {
    let len = 1usize << p;
    if p == 0 {
        return vec![T::one()];
    }
    let long = dyadic::<T>(p);
    let short = dyadic::<T>(p - 1);
    (0..len)
        .map(|t| if t < len / 2 { long - short } else { long })
        .collect()
}
