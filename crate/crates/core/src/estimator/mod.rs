//! Doubly randomised single-term estimator of `π(φ)`.
//!
//! A replicate draws a level `L ~ P_L` on `{l*, …, l_max}` and a horizon
//! `P ~ P_P` on `{0, …, p_max}`. It then runs the particle system (coupled
//! across `L` and `L−1` when `L > l*`) for `I_P = 2^P` unit blocks, feeds
//! every block into the plugged-law chain, and returns the difference of the
//! `I_P` and `I_{P−1}` prefix time averages divided by `P_L(L)·P_P(P)`.
//!
//! Truncating at `l_max` and `p_max` makes the estimator unbiased for the
//! level-`l_max`, horizon-`I_{p_max}` time average rather than for `π` itself.

mod chain;
mod measure;
mod replicate;

pub use chain::{advance_chain, kernel_step, kernel_step_coupled};
pub use measure::{prefix_weights, SignedEmpiricalMeasure};
pub use replicate::{
    assemble_base, assemble_increment, draw_horizon, draw_level, estimate, estimate_range,
    fold_replicates, single_term_given, unbiased_single, xi_base, xi_increment, Estimate,
    ReplicateValue,
    ParticleChains, PathSource, ReplicateResult,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the level and horizon probability mass functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PmfForm {
    /// `P_L(l) ∝ 2^-l (l+1) ln(l+2)`, `P_P(p) ∝ 2^-p (p+1) ln(p+2)²`.
    #[default]
    Experimental,
    /// `∝ 2^-x (x+1) log₂(x+2)²` for both.
    Theory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    pub l_star: u32,
    pub l_max: u32,
    pub p_max: u32,
    /// `N_l = n_base · (l − l_star + 1)`.
    pub n_base: usize,
    pub pmf_form: PmfForm,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            l_star: 3,
            l_max: 10,
            p_max: 7,
            n_base: 10,
            pmf_form: PmfForm::Experimental,
        }
    }
}

fn level_weight(form: PmfForm, l: u32) -> f64 {
    let x = l as f64;
    match form {
        PmfForm::Experimental => (-x).exp2() * (x + 1.0) * (x + 2.0).ln(),
        PmfForm::Theory => (-x).exp2() * (x + 1.0) * (x + 2.0).log2().powi(2),
    }
}

fn horizon_weight(form: PmfForm, p: u32) -> f64 {
    let x = p as f64;
    match form {
        PmfForm::Experimental => (-x).exp2() * (x + 1.0) * (x + 2.0).ln().powi(2),
        PmfForm::Theory => (-x).exp2() * (x + 1.0) * (x + 2.0).log2().powi(2),
    }
}

fn normalized(support: impl Iterator<Item = u32>, weight: impl Fn(u32) -> f64) -> Vec<(u32, f64)> {
    let raw: Vec<(u32, f64)> = support.map(|x| (x, weight(x))).collect();
    let total: f64 = raw.iter().map(|(_, w)| w).sum();
    raw.into_iter().map(|(x, w)| (x, w / total)).collect()
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l_max < self.l_star {
            return Err(Error::invalid(
                "l_max",
                format!("must be >= l_star ({} < {})", self.l_max, self.l_star),
            ));
        }
        if self.l_max > 24 {
            return Err(Error::invalid("l_max", "levels above 24 are not supported"));
        }
        if self.p_max > 30 {
            return Err(Error::invalid("p_max", "horizons above 2^30 are not supported"));
        }
        if self.n_base == 0 {
            return Err(Error::invalid("n_base", "must be at least 1"));
        }
        Ok(())
    }

    /// Particle count `N_l`.
    pub fn particles(&self, level: u32) -> usize {
        debug_assert!(level >= self.l_star);
        self.n_base * (level - self.l_star + 1) as usize
    }

    /// Chain length `I_p = 2^p`.
    pub fn horizon(&self, p: u32) -> usize {
        1usize << p
    }

    pub fn pmf_l(&self) -> Vec<(u32, f64)> {
        normalized(self.l_star..=self.l_max, |l| level_weight(self.pmf_form, l))
    }

    pub fn pmf_p(&self) -> Vec<(u32, f64)> {
        normalized(0..=self.p_max, |p| horizon_weight(self.pmf_form, p))
    }

    pub fn prob_l(&self, level: u32) -> f64 {
        self.pmf_l()
            .into_iter()
            .find(|&(l, _)| l == level)
            .map_or(0.0, |(_, p)| p)
    }

    pub fn prob_p(&self, p: u32) -> f64 {
        self.pmf_p()
            .into_iter()
            .find(|&(q, _)| q == p)
            .map_or(0.0, |(_, w)| w)
    }

    /// Abstract work of one replicate with `(L, P) = (level, p)`:
    /// `I_p · 2^l · (N_l² + 1{l > l*} N_{l−1}²)`.
    pub fn cost_term(&self, level: u32, p: u32) -> f64 {
        let n = self.particles(level) as f64;
        let mut per_step = n * n;
        if level > self.l_star {
            let nc = self.particles(level - 1) as f64;
            per_step += nc * nc;
        }
        self.horizon(p) as f64 * (level as f64).exp2() * per_step
    }

    /// `Σ_{l,p} P_L(l) P_P(p) · cost_term(l, p)`.
    pub fn expected_cost(&self) -> f64 {
        let pmf_p = self.pmf_p();
        self.pmf_l()
            .iter()
            .map(|&(l, pl)| {
                pmf_p
                    .iter()
                    .map(|&(p, pp)| pl * pp * self.cost_term(l, p))
                    .sum::<f64>()
            })
            .sum()
    }
}
