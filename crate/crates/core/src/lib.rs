//! Unbiased randomised multilevel estimation of functionals of the invariant
//! measure of McKean-Vlasov SDEs.
//!
//! The engine is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`); the `*64` / `*32` aliases below name the common choices.

pub mod analysis;
pub mod error;
pub mod estimator;
pub mod model;
pub mod particle;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use estimator::{
    estimate, estimate_range, unbiased_single, Estimate, EstimatorConfig, PmfForm,
    ReplicateResult, SignedEmpiricalMeasure,
};
pub use model::{
    curie_weiss, mean_field_ou, mle_gaussian, mle_gaussian_theta_star, neuron3d, DiffusionShape, Kernel, Model,
    NeuronParams,
};
pub use particle::{EmpiricalMeasure, LevelParams};
pub use rng::{ReplicateKey, StreamKey, StreamRole};
pub use scalar::Real;

pub type Model64 = Model<f64>;
pub type Model32 = Model<f32>;
pub type EmpiricalMeasure64 = EmpiricalMeasure<f64>;
pub type EmpiricalMeasure32 = EmpiricalMeasure<f32>;
pub type SignedMeasure64 = SignedEmpiricalMeasure<f64>;
pub type SignedMeasure32 = SignedEmpiricalMeasure<f32>;
pub type Estimate64 = Estimate<f64>;
pub type Estimate32 = Estimate<f32>;
pub type ReplicateResult64 = ReplicateResult<f64>;
pub type ReplicateResult32 = ReplicateResult<f32>;
