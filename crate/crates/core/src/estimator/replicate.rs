use std::ops::Range;

use rayon::prelude::*;

use super::chain::{kernel_step, kernel_step_coupled};
use super::measure::{prefix_weights, SignedEmpiricalMeasure};
use super::EstimatorConfig;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::particle::{propagate_block, propagate_block_coupled, EmpiricalMeasure, LevelParams};
use crate::rng::{categorical, ReplicateKey, StreamRole};
use crate::scalar::Real;

/// One replicate of the single-term estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateResult<T> {
    pub replicate_id: u64,
    pub measure: SignedEmpiricalMeasure<T>,
    pub level: u32,
    pub horizon: u32,
    pub cost_units: f64,
}

/// Produces chain paths `u_1, …, u_I` (one point per unit time).
///
/// [`ParticleChains`] is the real engine; tests substitute deterministic paths
/// to check the estimator's weighting in isolation.
pub trait PathSource<T>: Sync {
    fn dim(&self) -> usize;

    fn single_level(
        &self,
        level: u32,
        particles: usize,
        blocks: usize,
        key: &ReplicateKey,
    ) -> Result<Vec<Vec<T>>>;

    /// Fine path at `level` and coarse path at `level − 1`.
    fn coupled(
        &self,
        level: u32,
        fine_particles: usize,
        coarse_particles: usize,
        blocks: usize,
        key: &ReplicateKey,
    ) -> Result<(Vec<Vec<T>>, Vec<Vec<T>>)>;
}

/// Particle system plus plugged-law chain, block by block. Each block's law
/// snapshots are dropped as soon as the chain has consumed them.
#[derive(Debug, Clone, Copy)]
pub struct ParticleChains<'m, T> {
    pub model: &'m Model<T>,
}

impl<'m, T: Real> ParticleChains<'m, T> {
    pub fn new(model: &'m Model<T>) -> Self {
        ParticleChains { model }
    }

    fn start(&self, key: &ReplicateKey) -> Vec<T> {
        self.model.initial.draw(key.stream(StreamRole::InitDraw, 0))
    }
}

impl<'m, T: Real> PathSource<T> for ParticleChains<'m, T> {
    fn dim(&self) -> usize {
        self.model.dim
    }

    fn single_level(
        &self,
        level: u32,
        particles: usize,
        blocks: usize,
        key: &ReplicateKey,
    ) -> Result<Vec<Vec<T>>> {
        let level = LevelParams::new(level);
        let x0 = self.start(key);
        let mut state = EmpiricalMeasure::replicated(&x0, particles)?;
        let mut u = x0;
        let mut path = Vec::with_capacity(blocks);
        for t in 1..=blocks as u64 {
            let (block, next) =
                propagate_block(self.model, &level, &state, key.stream(StreamRole::ParticleFine, t))?;
            u = kernel_step(self.model, &block, &u, key.stream(StreamRole::Chain, t))?;
            path.push(u.clone());
            state = next;
        }
        Ok(path)
    }

    fn coupled(
        &self,
        level: u32,
        fine_particles: usize,
        coarse_particles: usize,
        blocks: usize,
        key: &ReplicateKey,
    ) -> Result<(Vec<Vec<T>>, Vec<Vec<T>>)> {
        let level = LevelParams::new(level);
        let x0 = self.start(key);
        let mut fine = EmpiricalMeasure::replicated(&x0, fine_particles)?;
        let mut coarse = EmpiricalMeasure::replicated(&x0, coarse_particles)?;
        let (mut u, mut ub) = (x0.clone(), x0);
        let mut fine_path = Vec::with_capacity(blocks);
        let mut coarse_path = Vec::with_capacity(blocks);
        for t in 1..=blocks as u64 {
            let out = propagate_block_coupled(
                self.model,
                &level,
                &fine,
                &coarse,
                key.stream(StreamRole::ParticleFine, t),
            )?;
            let (nu, nub) = kernel_step_coupled(
                self.model,
                &out.fine_block,
                &out.coarse_block,
                &u,
                &ub,
                key.stream(StreamRole::Chain, t),
            )?;
            fine_path.push(nu.clone());
            coarse_path.push(nub.clone());
            u = nu;
            ub = nub;
            fine = out.fine_state;
            coarse = out.coarse_state;
        }
        Ok((fine_path, coarse_path))
    }
}

/// Prefix-difference measure of a single path, unscaled.
pub fn assemble_base<T: Real>(dim: usize, p: u32, path: &[Vec<T>]) -> SignedEmpiricalMeasure<T> {
    let weights = prefix_weights::<T>(p);
    assert_eq!(weights.len(), path.len(), "path length must be I_P");
    let mut m = SignedEmpiricalMeasure::new(dim);
    for (u, w) in path.iter().zip(weights) {
        m.push(u, w);
    }
    m
}

/// Fine atoms with the prefix-difference weights, coarse atoms with their negation.
pub fn assemble_increment<T: Real>(
    dim: usize,
    p: u32,
    fine: &[Vec<T>],
    coarse: &[Vec<T>],
) -> SignedEmpiricalMeasure<T> {
    let weights = prefix_weights::<T>(p);
    assert_eq!(weights.len(), fine.len(), "fine path length must be I_P");
    assert_eq!(weights.len(), coarse.len(), "coarse path length must be I_P");
    let mut m = SignedEmpiricalMeasure::new(dim);
    for (u, &w) in fine.iter().zip(&weights) {
        m.push(u, w);
    }
    for (u, &w) in coarse.iter().zip(&weights) {
        m.push(u, -w);
    }
    m
}

pub fn draw_level(config: &EstimatorConfig, key: &ReplicateKey) -> Result<u32> {
    let pmf = config.pmf_l();
    let probs: Vec<f64> = pmf.iter().map(|x| x.1).collect();
    let i = categorical(key.stream(StreamRole::LevelDraw, 0), &probs)?;
    Ok(pmf[i].0)
}

pub fn draw_horizon(config: &EstimatorConfig, key: &ReplicateKey) -> Result<u32> {
    let pmf = config.pmf_p();
    let probs: Vec<f64> = pmf.iter().map(|x| x.1).collect();
    let i = categorical(key.stream(StreamRole::TimeDraw, 0), &probs)?;
    Ok(pmf[i].0)
}

fn annotate(key: &ReplicateKey, level: u32, horizon: u32) -> impl FnOnce(Error) -> Error + '_ {
    move |e| match e {
        e @ Error::Replicate { .. } => e,
        e => Error::Replicate {
            replicate: key.replicate_id,
            level,
            horizon,
            source: Box::new(e),
        },
    }
}

/// Level term `ξ_level` for a given `(level, P)`, scaled by `1/P_P(P)` only.
fn level_term<T: Real, S: PathSource<T> + ?Sized>(
    source: &S,
    config: &EstimatorConfig,
    level: u32,
    p: u32,
    key: &ReplicateKey,
) -> Result<ReplicateResult<T>> {
    let blocks = config.horizon(p);
    let dim = source.dim();
    let measure = if level == config.l_star {
        let path = source
            .single_level(level, config.particles(level), blocks, key)
            .map_err(annotate(key, level, p))?;
        assemble_base(dim, p, &path)
    } else {
        let (fine, coarse) = source
            .coupled(
                level,
                config.particles(level),
                config.particles(level - 1),
                blocks,
                key,
            )
            .map_err(annotate(key, level, p))?;
        assemble_increment(dim, p, &fine, &coarse)
    };
    Ok(ReplicateResult {
        replicate_id: key.replicate_id,
        measure: measure.scaled(T::of(1.0 / config.prob_p(p))),
        level,
        horizon: p,
        cost_units: config.cost_term(level, p),
    })
}

/// `π̂` for a fixed `(L, P)`: the level term divided by `P_L(L)`.
pub fn single_term_given<T: Real, S: PathSource<T> + ?Sized>(
    source: &S,
    config: &EstimatorConfig,
    level: u32,
    p: u32,
    key: &ReplicateKey,
) -> Result<ReplicateResult<T>> {
    if level < config.l_star || level > config.l_max {
        return Err(Error::invalid("level", format!("{level} outside [l_star, l_max]")));
    }
    if p > config.p_max {
        return Err(Error::invalid("horizon", format!("{p} exceeds p_max")));
    }
    let mut r = level_term(source, config, level, p, key)?;
    r.measure = r.measure.scaled(T::of(1.0 / config.prob_l(level)));
    Ok(r)
}

/// `ξ_{l*}`: draws `P` and runs the base level.
pub fn xi_base<T: Real>(
    model: &Model<T>,
    config: &EstimatorConfig,
    key: &ReplicateKey,
) -> Result<ReplicateResult<T>> {
    config.validate()?;
    let p = draw_horizon(config, key)?;
    level_term(&ParticleChains::new(model), config, config.l_star, p, key)
}

/// `ξ_l` for `l_star < l ≤ l_max`: draws `P` and runs the coupled pair `(l, l−1)`.
pub fn xi_increment<T: Real>(
    model: &Model<T>,
    config: &EstimatorConfig,
    level: u32,
    key: &ReplicateKey,
) -> Result<ReplicateResult<T>> {
    config.validate()?;
    if level <= config.l_star || level > config.l_max {
        return Err(Error::invalid(
            "level",
            format!("increment level {level} outside (l_star, l_max]"),
        ));
    }
    let p = draw_horizon(config, key)?;
    level_term(&ParticleChains::new(model), config, level, p, key)
}

/// One replicate: draws `L` and `P`, returns `ξ_L / P_L(L)`.
pub fn unbiased_single<T: Real>(
    model: &Model<T>,
    config: &EstimatorConfig,
    key: &ReplicateKey,
) -> Result<ReplicateResult<T>> {
    config.validate()?;
    let level = draw_level(config, key)?;
    let p = draw_horizon(config, key)?;
    single_term_given(&ParticleChains::new(model), config, level, p, key)
}

const CHUNK: u64 = 1024;

/// Runs replicates `ids` (in parallel on the current rayon pool), maps each to
/// `R`, and folds the results strictly in replicate-id order. The first failing
/// replicate id aborts the fold.
pub fn fold_replicates<T, R, A, M, F>(
    model: &Model<T>,
    config: &EstimatorConfig,
    master_seed: u64,
    ids: Range<u64>,
    map: M,
    init: A,
    mut fold: F,
) -> Result<A>
where
    T: Real,
    R: Send,
    M: Fn(ReplicateResult<T>) -> R + Sync,
    F: FnMut(A, R) -> A,
{
    model.validate()?;
    config.validate()?;
    let mut acc = init;
    let mut start = ids.start;
    while start < ids.end {
        let end = (start + CHUNK).min(ids.end);
        let chunk: Vec<Result<R>> = (start..end)
            .into_par_iter()
            .map(|id| unbiased_single(model, config, &ReplicateKey::new(master_seed, id)).map(&map))
            .collect();
        for r in chunk {
            acc = fold(acc, r?);
        }
        start = end;
    }
    Ok(acc)
}

/// Per-replicate row of an [`Estimate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateValue<T> {
    pub replicate_id: u64,
    pub level: u32,
    pub horizon: u32,
    pub value: T,
    pub cost_units: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate<T> {
    pub mean: T,
    /// Sample standard deviation over `sqrt(M)`; `None` for a single replicate.
    pub std_error: Option<T>,
    pub replicates: Vec<ReplicateValue<T>>,
    pub total_cost: f64,
}

impl<T: Real> Estimate<T> {
    pub fn from_values(replicates: Vec<ReplicateValue<T>>) -> Self {
        let m = replicates.len();
        assert!(m > 0, "an estimate needs at least one replicate");
        let n = T::of_usize(m);
        let mean = replicates.iter().map(|r| r.value).sum::<T>() / n;
        let std_error = (m > 1).then(|| {
            let ss: T = replicates.iter().map(|r| (r.value - mean).powi(2)).sum();
            (ss / (n - T::one())).sqrt() / n.sqrt()
        });
        let total_cost = replicates.iter().map(|r| r.cost_units).sum();
        Estimate {
            mean,
            std_error,
            replicates,
            total_cost,
        }
    }

    pub fn values(&self) -> Vec<T> {
        self.replicates.iter().map(|r| r.value).collect()
    }
}

/// Average of `M` replicates `0..M` of `π̂(φ)`.
pub fn estimate<T, F>(
    model: &Model<T>,
    config: &EstimatorConfig,
    phi: F,
    replicates: u64,
    master_seed: u64,
) -> Result<Estimate<T>>
where
    T: Real,
    F: Fn(&[T]) -> T + Sync,
{
    estimate_range(model, config, phi, master_seed, 0..replicates)
}

/// As [`estimate`] over an explicit replicate-id range.
pub fn estimate_range<T, F>(
    model: &Model<T>,
    config: &EstimatorConfig,
    phi: F,
    master_seed: u64,
    ids: Range<u64>,
) -> Result<Estimate<T>>
where
    T: Real,
    F: Fn(&[T]) -> T + Sync,
{
    if ids.is_empty() {
        return Err(Error::invalid("replicates", "need at least one replicate"));
    }
    let rows = fold_replicates(
        model,
        config,
        master_seed,
        ids.clone(),
        |r| ReplicateValue {
            replicate_id: r.replicate_id,
            level: r.level,
            horizon: r.horizon,
            value: r.measure.evaluate(&phi),
            cost_units: r.cost_units,
        },
        Vec::with_capacity((ids.end - ids.start) as usize),
        |mut acc, row| {
            acc.push(row);
            acc
        },
    )?;
    Ok(Estimate::from_values(rows))
}
