//! The plugged-law Euler chain: a single path driven by the recorded
//! empirical measures of a block instead of its own law.

use crate::error::{Error, Result};
use crate::model::Model;
use crate::particle::{EulerStepper, LawBlock};
use crate::rng::{coarsen, gaussian_increments, StreamKey};
use crate::scalar::Real;

/// Runs the chain from `u` across one block with explicit increments
/// (`block.len()` vectors of dimension `d`, flat).
pub fn advance_chain<T: Real>(
    model: &Model<T>,
    block: &LawBlock<T>,
    u: &[T],
    increments: &[T],
    t: u64,
) -> Result<Vec<T>> {
    let d = model.dim;
    if u.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: u.len(),
        });
    }
    if block.len() != block.level.steps_per_unit || increments.len() != block.len() * d {
        return Err(Error::Domain(format!(
            "chain increments ({}) do not match a level-{} block",
            increments.len(),
            block.level.level
        )));
    }
    let dt = block.level.delta;
    let mut stepper = EulerStepper::new(model);
    let mut x = u.to_vec();
    let mut next = vec![T::zero(); d];
    for (k, dw) in increments.chunks_exact(d).enumerate() {
        let (s1, s2) = block.interaction(model, k, &x);
        stepper.step(&x, s1, s2, dw, dt, &mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::ChainBlowUp { t, k });
        }
        std::mem::swap(&mut x, &mut next);
    }
    Ok(x)
}

/// One unit of the chain at the block's level with increments from `key`.
pub fn kernel_step<T: Real>(
    model: &Model<T>,
    block: &LawBlock<T>,
    u: &[T],
    key: StreamKey,
) -> Result<Vec<T>> {
    let dw = gaussian_increments(key, block.level.steps_per_unit, model.dim, block.level.delta)?;
    advance_chain(model, block, u, &dw, key.counter)
}

/// Synchronously coupled fine and coarse chains: the coarse increments are the
/// pairwise sums of the fine ones.
pub fn kernel_step_coupled<T: Real>(
    model: &Model<T>,
    fine_block: &LawBlock<T>,
    coarse_block: &LawBlock<T>,
    u: &[T],
    u_coarse: &[T],
    key: StreamKey,
) -> Result<(Vec<T>, Vec<T>)> {
    if coarse_block.level.level + 1 != fine_block.level.level {
        return Err(Error::invalid(
            "level",
            format!(
                "coarse block level {} is not one below fine level {}",
                coarse_block.level.level, fine_block.level.level
            ),
        ));
    }
    let fine_level = fine_block.level;
    let dw = gaussian_increments(key, fine_level.steps_per_unit, model.dim, fine_level.delta)?;
    let dw_coarse = coarsen(&dw, model.dim)?;
    let fine = advance_chain(model, fine_block, u, &dw, key.counter)?;
    let coarse = advance_chain(model, coarse_block, u_coarse, &dw_coarse, key.counter)?;
    Ok((fine, coarse))
}
