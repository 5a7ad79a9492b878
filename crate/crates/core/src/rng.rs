//! Counter-based random streams.
//!
//! Every stream is a ChaCha8 generator keyed directly by the 32 bytes of a
//! [`StreamKey`]: `master_seed`, `replicate_id`, a role tag and a counter.
//! Distinct keys give independent streams and the same key always gives the
//! same stream, so replicates can be scheduled in any order or on any number
//! of threads without changing a single output bit.
//!
//! Gaussian variates use the ziggurat sampler of `rand_distr::StandardNormal`
//! evaluated in `f64`, then scaled by `sqrt(Δ)` and narrowed to the scalar type.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// What a stream is used for within one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamRole {
    /// Brownian increments of the (fine) particle system.
    ParticleFine,
    /// Reserved for a coarse-only particle stream; coarse particles currently
    /// reuse the fine increments.
    ParticleCoarseShared,
    /// Brownian increments of the plugged-law chain.
    Chain,
    LevelDraw,
    TimeDraw,
    InitDraw,
}

impl StreamRole {
    fn tag(self) -> u64 {
        match self {
            StreamRole::ParticleFine => 1,
            StreamRole::ParticleCoarseShared => 2,
            StreamRole::Chain => 3,
            StreamRole::LevelDraw => 4,
            StreamRole::TimeDraw => 5,
            StreamRole::InitDraw => 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master_seed: u64,
    pub replicate_id: u64,
    pub role: StreamRole,
    pub counter: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64, replicate_id: u64, role: StreamRole, counter: u64) -> Self {
        StreamKey {
            master_seed,
            replicate_id,
            role,
            counter,
        }
    }

    pub fn with_counter(self, counter: u64) -> Self {
        StreamKey { counter, ..self }
    }

    pub fn with_role(self, role: StreamRole) -> Self {
        StreamKey { role, ..self }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        seed[0..8].copy_from_slice(&self.master_seed.to_le_bytes());
        seed[8..16].copy_from_slice(&self.replicate_id.to_le_bytes());
        seed[16..24].copy_from_slice(&self.role.tag().to_le_bytes());
        seed[24..32].copy_from_slice(&self.counter.to_le_bytes());
        ChaCha8Rng::from_seed(seed)
    }
}

/// Keys of one replicate; hands out the per-role streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ReplicateKey {
    pub master_seed: u64,
    pub replicate_id: u64,
}

impl ReplicateKey {
    pub fn new(master_seed: u64, replicate_id: u64) -> Self {
        ReplicateKey {
            master_seed,
            replicate_id,
        }
    }

    pub fn stream(&self, role: StreamRole, counter: u64) -> StreamKey {
        StreamKey::new(self.master_seed, self.replicate_id, role, counter)
    }
}

/// Standard normal draw in `f64`.
#[inline]
pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// `count` i.i.d. `N(0, Δ·I_dim)` vectors, stored flat (vector `c` occupies
/// `[c*dim, (c+1)*dim)`).
pub fn gaussian_increments<T: Real>(
    key: StreamKey,
    count: usize,
    dim: usize,
    delta: T,
) -> Result<Vec<T>> {
    if !(delta > T::zero()) || !delta.is_finite() {
        return Err(Error::Domain(format!(
            "increment variance must be positive and finite, got {delta}"
        )));
    }
    if count == 0 || dim == 0 {
        return Err(Error::Domain("need at least one increment of dimension >= 1".into()));
    }
    let mut rng = key.rng();
    let scale = delta.to_f64_lossy().sqrt();
    Ok((0..count * dim)
        .map(|_| T::of(standard_normal(&mut rng) * scale))
        .collect())
}

/// Sums consecutive pairs of `dim`-vectors: `out[k] = fine[2k] + fine[2k+1]`.
pub fn coarsen<T: Real>(fine: &[T], dim: usize) -> Result<Vec<T>> {
    if dim == 0 || fine.len() % dim != 0 {
        return Err(Error::Domain(format!(
            "sequence length {} is not a multiple of dimension {dim}",
            fine.len()
        )));
    }
    let count = fine.len() / dim;
    if count % 2 != 0 {
        return Err(Error::OddLength(count));
    }
    let mut out = Vec::with_capacity(fine.len() / 2);
    for pair in fine.chunks_exact(2 * dim) {
        let (a, b) = pair.split_at(dim);
        out.extend(a.iter().zip(b).map(|(&x, &y)| x + y));
    }
    Ok(out)
}

/// Checks that `pmf` is a probability vector (non-negative, sums to one within 1e-12).
pub fn validate_pmf(pmf: &[f64]) -> Result<()> {
    if pmf.is_empty() {
        return Err(Error::InvalidPmf("empty".into()));
    }
    if let Some(bad) = pmf.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidPmf(format!("entry {bad} is not a probability")));
    }
    let total: f64 = pmf.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidPmf(format!("entries sum to {total}")));
    }
    Ok(())
}

/// Draws an index with probability `pmf[i]` from the stream `key`.
pub fn categorical(key: StreamKey, pmf: &[f64]) -> Result<usize> {
    validate_pmf(pmf)?;
    let u: f64 = key.rng().random();
    Ok(categorical_from_uniform(u, pmf))
}

pub(crate) fn categorical_from_uniform(u: f64, pmf: &[f64]) -> usize {
    let mut cumulative = 0.0;
    for (i, &p) in pmf.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return i;
        }
    }
    // Rounding left u above the final cumulative sum.
    pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}
