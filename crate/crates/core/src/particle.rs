//! Interacting particle approximation of the mean-field law, one unit of time
//! at a time, at a single level or as a synchronously coupled pair of levels.

use crate::error::{Error, Result};
use crate::model::{Kernel, Model};
use crate::rng::{gaussian_increments, StreamKey};
use crate::scalar::{dyadic, Real};

/// Discretisation level `l`: step `Δ = 2^-l`, `2^l` sub-steps per unit time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelParams<T> {
    pub level: u32,
    pub delta: T,
    pub steps_per_unit: usize,
}

impl<T: Real> LevelParams<T> {
    pub fn new(level: u32) -> Self {
        assert!(level < usize::BITS - 1, "level {level} too large");
        LevelParams {
            level,
            delta: dyadic(level),
            steps_per_unit: 1usize << level,
        }
    }

    /// The next coarser level. Panics at level 0.
    pub fn coarser(&self) -> Self {
        Self::new(self.level - 1)
    }
}

/// `N` points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> EmpiricalMeasure<T> {
    pub fn new(dim: usize, data: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        if data.len() % dim != 0 {
            return Err(Error::Domain(format!(
                "{} coordinates do not split into points of dimension {dim}",
                data.len()
            )));
        }
        Ok(EmpiricalMeasure { dim, data })
    }

    pub fn from_points<I, P>(points: I) -> Result<Self>
    where
        I: IntoIterator<Item = P>,
        P: AsRef<[T]>,
    {
        let mut dim = None;
        let mut data = Vec::new();
        for p in points {
            let p = p.as_ref();
            match dim {
                None => dim = Some(p.len()),
                Some(d) if d != p.len() => {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: p.len(),
                    })
                }
                _ => {}
            }
            data.extend_from_slice(p);
        }
        let dim = dim.ok_or(Error::EmptyMeasure)?;
        Self::new(dim, data)
    }

    /// `n` copies of `x`.
    pub fn replicated(x: &[T], n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyMeasure);
        }
        let mut data = Vec::with_capacity(n * x.len());
        for _ in 0..n {
            data.extend_from_slice(x);
        }
        Self::new(x.len(), data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn particle(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, T> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Coordinate `component` of every particle.
    pub fn component(&self, component: usize) -> Vec<T> {
        self.iter().map(|p| p[component]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Keeps the first `n` particles.
    pub fn truncated(&self, n: usize) -> Self {
        EmpiricalMeasure {
            dim: self.dim,
            data: self.data[..n * self.dim].to_vec(),
        }
    }
}

/// `∫ inner dμ` for each separable kernel, computed once per snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionSummary<T> {
    pub inner1: Option<T>,
    pub inner2: Option<T>,
}

fn inner_mean<T: Real>(kernel: &Kernel<T>, measure: &EmpiricalMeasure<T>) -> Option<T> {
    match kernel {
        Kernel::Separable { inner, .. } => {
            let total: T = measure.iter().map(|z| inner(z)).sum();
            Some(total / T::of_usize(measure.len()))
        }
        _ => None,
    }
}

impl<T: Real> InteractionSummary<T> {
    pub fn of(model: &Model<T>, measure: &EmpiricalMeasure<T>) -> Self {
        InteractionSummary {
            inner1: inner_mean(&model.kernel1, measure),
            inner2: inner_mean(&model.kernel2, measure),
        }
    }
}

/// Evaluates `ξ̄(x, μ)` for a kernel against a fixed snapshot.
#[inline]
pub(crate) fn field_value<T: Real>(
    kernel: &Kernel<T>,
    inner: Option<T>,
    x: &[T],
    measure: &EmpiricalMeasure<T>,
) -> T {
    match kernel {
        Kernel::Zero => T::zero(),
        Kernel::Separable { outer, .. } => {
            outer(x) * inner.expect("separable kernel without a precomputed summary")
        }
        Kernel::General(f) => {
            let total: T = measure.iter().map(|z| f(x, z)).sum();
            total / T::of_usize(measure.len())
        }
    }
}

/// Empirical measures at the sub-times `t−1 + kΔ`, `k = 0..2^l`, of one unit block.
#[derive(Debug, Clone)]
pub struct LawBlock<T> {
    pub level: LevelParams<T>,
    pub snapshots: Vec<EmpiricalMeasure<T>>,
    pub summaries: Vec<InteractionSummary<T>>,
}

impl<T: Real> LawBlock<T> {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// `(ξ̄₁(x, μ_k), ξ̄₂(x, μ_k))`.
    #[inline]
    pub fn interaction(&self, model: &Model<T>, k: usize, x: &[T]) -> (T, T) {
        let snap = &self.snapshots[k];
        let sum = &self.summaries[k];
        (
            field_value(&model.kernel1, sum.inner1, x, snap),
            field_value(&model.kernel2, sum.inner2, x, snap),
        )
    }
}

/// One Euler-Maruyama step `x + a(x, s₁)Δ + b(x, s₂)ΔW`, with the rows listed
/// in `step_scaled_noise_rows` receiving `Δ·(b ΔW)`.
pub(crate) struct EulerStepper<'m, T> {
    model: &'m Model<T>,
    drift: Vec<T>,
    diffusion: Vec<T>,
    scaled: Vec<bool>,
}

impl<'m, T: Real> EulerStepper<'m, T> {
    pub(crate) fn new(model: &'m Model<T>) -> Self {
        let d = model.dim;
        let mut scaled = vec![false; d];
        for &r in &model.step_scaled_noise_rows {
            scaled[r] = true;
        }
        let mut diffusion = vec![T::zero(); d * d];
        if model.diffusion_shape.constant {
            (model.diffusion)(&vec![T::zero(); d], T::zero(), &mut diffusion);
        }
        EulerStepper {
            model,
            drift: vec![T::zero(); d],
            diffusion,
            scaled,
        }
    }

    #[inline]
    pub(crate) fn step(&mut self, x: &[T], s1: T, s2: T, dw: &[T], dt: T, out: &mut [T]) {
        let d = self.model.dim;
        let shape = self.model.diffusion_shape;
        (self.model.drift)(x, s1, &mut self.drift);
        if !shape.constant {
            (self.model.diffusion)(x, s2, &mut self.diffusion);
        }
        let rows = self.diffusion.chunks_exact(d);
        for (r, row) in rows.enumerate() {
            let mut noise = if shape.diagonal {
                row[r] * dw[r]
            } else {
                let mut acc = T::zero();
                for (&b, &w) in row.iter().zip(dw) {
                    // exact zeros contribute nothing; skipping them keeps sparse rows cheap
                    if b != T::zero() {
                        acc += b * w;
                    }
                }
                acc
            };
            if self.scaled[r] {
                noise *= dt;
            }
            out[r] = x[r] + self.drift[r] * dt + noise;
        }
    }
}

/// Brownian increments of one block: `steps × particles` vectors of dimension `dim`,
/// indexed by sub-step first.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockNoise<T> {
    pub steps: usize,
    pub particles: usize,
    pub dim: usize,
    data: Vec<T>,
}

impl<T: Real> BlockNoise<T> {
    pub fn draw(key: StreamKey, level: &LevelParams<T>, particles: usize, dim: usize) -> Result<Self> {
        let steps = level.steps_per_unit;
        let data = gaussian_increments(key, steps * particles, dim, level.delta)?;
        Ok(BlockNoise {
            steps,
            particles,
            dim,
            data,
        })
    }

    #[inline]
    pub fn increment(&self, k: usize, i: usize) -> &[T] {
        let start = (k * self.particles + i) * self.dim;
        &self.data[start..start + self.dim]
    }

    /// Increments of the first `particles` particles over steps twice as long:
    /// entry `(k, i)` is `self(2k, i) + self(2k+1, i)`.
    pub fn coarsen_to(&self, particles: usize) -> Result<Self> {
        if particles > self.particles {
            return Err(Error::invalid(
                "particles",
                format!("cannot coarsen {} particles into {particles}", self.particles),
            ));
        }
        if self.steps % 2 != 0 {
            return Err(Error::OddLength(self.steps));
        }
        let mut data = Vec::with_capacity(self.steps / 2 * particles * self.dim);
        for k in 0..self.steps / 2 {
            for i in 0..particles {
                let (a, b) = (self.increment(2 * k, i), self.increment(2 * k + 1, i));
                data.extend(a.iter().zip(b).map(|(&x, &y)| x + y));
            }
        }
        Ok(BlockNoise {
            steps: self.steps / 2,
            particles,
            dim: self.dim,
            data,
        })
    }
}

/// Advances the particle cloud through one unit block with the given increments.
///
/// `t` labels the block (the time at its end) in error reports.
pub fn advance_particles<T: Real>(
    model: &Model<T>,
    level: &LevelParams<T>,
    state: &EmpiricalMeasure<T>,
    noise: &BlockNoise<T>,
    t: u64,
) -> Result<(LawBlock<T>, EmpiricalMeasure<T>)> {
    if state.dim() != model.dim {
        return Err(Error::DimensionMismatch {
            expected: model.dim,
            found: state.dim(),
        });
    }
    if state.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let n = state.len();
    if noise.steps != level.steps_per_unit || noise.particles != n || noise.dim != model.dim {
        return Err(Error::Domain(format!(
            "noise shape ({}, {}, {}) does not match block ({}, {n}, {})",
            noise.steps, noise.particles, noise.dim, level.steps_per_unit, model.dim
        )));
    }
    let d = model.dim;
    let dt = level.delta;
    let mut stepper = EulerStepper::new(model);
    let mut snapshots = Vec::with_capacity(level.steps_per_unit);
    let mut summaries = Vec::with_capacity(level.steps_per_unit);
    let mut current = state.clone();
    for k in 0..level.steps_per_unit {
        let mut next = vec![T::zero(); n * d];
        let summary = InteractionSummary::of(model, &current);
        for i in 0..n {
            let x = current.particle(i);
            let s1 = field_value(&model.kernel1, summary.inner1, x, &current);
            let s2 = field_value(&model.kernel2, summary.inner2, x, &current);
            let out = &mut next[i * d..(i + 1) * d];
            stepper.step(x, s1, s2, noise.increment(k, i), dt, out);
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::ParticleBlowUp { t, k, i });
            }
        }
        let advanced = EmpiricalMeasure { dim: d, data: next };
        snapshots.push(std::mem::replace(&mut current, advanced));
        summaries.push(summary);
    }
    Ok((
        LawBlock {
            level: *level,
            snapshots,
            summaries,
        },
        current,
    ))
}

/// One unit block of the single-level particle system; increments come from `key`.
pub fn propagate_block<T: Real>(
    model: &Model<T>,
    level: &LevelParams<T>,
    state: &EmpiricalMeasure<T>,
    key: StreamKey,
) -> Result<(LawBlock<T>, EmpiricalMeasure<T>)> {
    let noise = BlockNoise::draw(key, level, state.len(), model.dim)?;
    advance_particles(model, level, state, &noise, key.counter)
}

/// Output of [`propagate_block_coupled`].
#[derive(Debug, Clone)]
pub struct CoupledBlock<T> {
    pub fine_block: LawBlock<T>,
    pub coarse_block: LawBlock<T>,
    pub fine_state: EmpiricalMeasure<T>,
    pub coarse_state: EmpiricalMeasure<T>,
}

/// Fine and coarse increments of one coupled block: coarse particle `i` uses
/// the pairwise sums of fine particle `i`'s increments.
pub fn coupled_noise<T: Real>(
    key: StreamKey,
    fine_level: &LevelParams<T>,
    fine_particles: usize,
    coarse_particles: usize,
    dim: usize,
) -> Result<(BlockNoise<T>, BlockNoise<T>)> {
    let fine = BlockNoise::draw(key, fine_level, fine_particles, dim)?;
    let coarse = fine.coarsen_to(coarse_particles)?;
    Ok((fine, coarse))
}

/// One unit block of the level-`l` system with `N_l` particles coupled to the
/// level-`(l−1)` system with `N_{l−1} < N_l` particles.
pub fn propagate_block_coupled<T: Real>(
    model: &Model<T>,
    level: &LevelParams<T>,
    fine_state: &EmpiricalMeasure<T>,
    coarse_state: &EmpiricalMeasure<T>,
    key: StreamKey,
) -> Result<CoupledBlock<T>> {
    if level.level == 0 {
        return Err(Error::invalid("level", "coupling needs a level >= 1"));
    }
    if coarse_state.len() >= fine_state.len() {
        return Err(Error::invalid(
            "particles",
            format!(
                "coarse system must have fewer particles ({} >= {})",
                coarse_state.len(),
                fine_state.len()
            ),
        ));
    }
    if coarse_state.dim() != fine_state.dim() {
        return Err(Error::DimensionMismatch {
            expected: fine_state.dim(),
            found: coarse_state.dim(),
        });
    }
    let (fine_noise, coarse_noise) =
        coupled_noise(key, level, fine_state.len(), coarse_state.len(), model.dim)?;
    let (fine_block, fine_state) = advance_particles(model, level, fine_state, &fine_noise, key.counter)?;
    let (coarse_block, coarse_state) =
        advance_particles(model, &level.coarser(), coarse_state, &coarse_noise, key.counter)?;
    Ok(CoupledBlock {
        fine_block,
        coarse_block,
        fine_state,
        coarse_state,
    })
}
