//! McKean-Vlasov models `dX = a(X, ξ̄₁(X, μ)) dt + b(X, ξ̄₂(X, μ)) dW`.
//!
//! The law enters the coefficients only through the interaction means
//! `ξ̄_m(x, μ) = ∫ ξ_m(x, z) μ(dz)`. Kernels of the form `ξ(x, z) = g(x)·h(z)`
//! can be declared [`Kernel::Separable`], which lets the particle engine compute
//! `∫ h dμ` once per sub-step instead of once per particle.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::particle::EmpiricalMeasure;
use crate::rng::{standard_normal, StreamKey};
use crate::scalar::Real;

pub type PointFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
pub type PairFn<T> = Arc<dyn Fn(&[T], &[T]) -> T + Send + Sync>;
/// `(state, interaction value, output)`; writes `d` drift entries or a
/// row-major `d×d` diffusion matrix into `output`.
pub type CoefficientFn<T> = Arc<dyn Fn(&[T], T, &mut [T]) + Send + Sync>;

#[derive(Clone)]
pub enum Kernel<T> {
    Zero,
    /// `ξ(x, z) = outer(x) · inner(z)`.
    Separable { outer: PointFn<T>, inner: PointFn<T> },
    General(PairFn<T>),
}

impl<T: Real> Kernel<T> {
    pub fn eval(&self, x: &[T], z: &[T]) -> T {
        match self {
            Kernel::Zero => T::zero(),
            Kernel::Separable { outer, inner } => outer(x) * inner(z),
            Kernel::General(f) => f(x, z),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Kernel::Zero)
    }
}

impl<T> fmt::Debug for Kernel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Zero => f.write_str("Zero"),
            Kernel::Separable { .. } => f.write_str("Separable"),
            Kernel::General(_) => f.write_str("General"),
        }
    }
}

/// `(1/N) Σ_j kernel(x, X^j)` by direct summation over the particles.
pub fn interaction_mean<T: Real>(
    kernel: &Kernel<T>,
    x: &[T],
    measure: &EmpiricalMeasure<T>,
) -> Result<T> {
    if measure.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let total: T = measure.iter().map(|z| kernel.eval(x, z)).sum();
    Ok(total / T::of_usize(measure.len()))
}

/// Starting point of every particle and of the chain.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState<T> {
    Point(Vec<T>),
    /// Independent Gaussian coordinates, drawn once per replicate.
    DiagonalGaussian { mean: Vec<T>, variance: Vec<T> },
}

impl<T: Real> InitialState<T> {
    pub fn dim(&self) -> usize {
        match self {
            InitialState::Point(x) => x.len(),
            InitialState::DiagonalGaussian { mean, .. } => mean.len(),
        }
    }

    pub fn draw(&self, key: StreamKey) -> Vec<T> {
        match self {
            InitialState::Point(x) => x.clone(),
            InitialState::DiagonalGaussian { mean, variance } => {
                let mut rng = key.rng();
                mean.iter()
                    .zip(variance)
                    .map(|(&m, &v)| m + T::of(standard_normal(&mut rng) * v.to_f64_lossy().sqrt()))
                    .collect()
            }
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self, InitialState::DiagonalGaussian { .. })
    }
}

/// Structure of the diffusion matrix declared by a model. The engine uses it
/// to skip work; a declaration that does not hold is rejected by `validate`
/// at the initial state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DiffusionShape {
    /// Only diagonal entries may be non-zero.
    pub diagonal: bool,
    /// The matrix depends on neither the state nor the interaction value.
    pub constant: bool,
}

impl DiffusionShape {
    pub const CONSTANT_DIAGONAL: DiffusionShape = DiffusionShape {
        diagonal: true,
        constant: true,
    };
}

#[derive(Clone)]
pub struct Model<T> {
    pub name: String,
    pub dim: usize,
    pub drift: CoefficientFn<T>,
    pub diffusion: CoefficientFn<T>,
    pub kernel1: Kernel<T>,
    pub kernel2: Kernel<T>,
    pub initial: InitialState<T>,
    /// Rows (0-based) whose noise is multiplied by the step size Δ on top of
    /// the `sqrt(Δ)` Brownian scaling.
    pub step_scaled_noise_rows: Vec<usize>,
    pub diffusion_shape: DiffusionShape,
}

impl<T> fmt::Debug for Model<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Model")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("kernel1", &self.kernel1)
            .field("kernel2", &self.kernel2)
            .field("step_scaled_noise_rows", &self.step_scaled_noise_rows)
            .field("diffusion_shape", &self.diffusion_shape)
            .finish_non_exhaustive()
    }
}

impl<T: Real> Model<T> {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        if self.initial.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: self.initial.dim(),
            });
        }
        if let Some(&r) = self.step_scaled_noise_rows.iter().find(|&&r| r >= self.dim) {
            return Err(Error::invalid(
                "step_scaled_noise_rows",
                format!("row {r} outside 0..{}", self.dim),
            ));
        }
        self.check_diffusion_shape()
    }

    fn check_diffusion_shape(&self) -> Result<()> {
        let d = self.dim;
        let x0 = match &self.initial {
            InitialState::Point(p) => p.clone(),
            InitialState::DiagonalGaussian { mean, .. } => mean.clone(),
        };
        let x1: Vec<T> = x0.iter().map(|&v| v + T::of(0.37)).collect();
        let b0 = self.diffusion_at(&x0, T::zero());
        let b1 = self.diffusion_at(&x1, T::of(0.61));
        if self.diffusion_shape.diagonal {
            let off = |b: &[T]| (0..d * d).any(|j| j / d != j % d && b[j] != T::zero());
            if off(&b0) || off(&b1) {
                return Err(Error::invalid(
                    "diffusion_shape",
                    "declared diagonal but has off-diagonal entries",
                ));
            }
        }
        if self.diffusion_shape.constant && b0 != b1 {
            return Err(Error::invalid(
                "diffusion_shape",
                "declared constant but varies with the state",
            ));
        }
        Ok(())
    }

    pub fn drift_at(&self, x: &[T], s: T) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        (self.drift)(x, s, &mut out);
        out
    }

    pub fn diffusion_at(&self, x: &[T], s: T) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim * self.dim];
        (self.diffusion)(x, s, &mut out);
        out
    }

    pub fn with_initial(mut self, initial: InitialState<T>) -> Self {
        self.initial = initial;
        self
    }
}

fn positive<T: Real>(name: &'static str, v: T) -> Result<T> {
    if v > T::zero() && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
    }
}

fn finite<T: Real>(name: &'static str, v: T) -> Result<T> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(name, "must be finite"))
    }
}

fn identity_inner<T: Real>(component: usize) -> PointFn<T> {
    Arc::new(move |z: &[T]| z[component])
}

fn constant_outer<T: Real>(value: T) -> PointFn<T> {
    Arc::new(move |_: &[T]| value)
}

/// Curie-Weiss: `dX = β(−X³ + X + K E[X]) dt + σ dW`.
pub fn curie_weiss<T: Real>(beta: T, k: T, sigma: T, x0: T) -> Result<Model<T>> {
    let beta = positive("beta", beta)?;
    let k = positive("K", k)?;
    let sigma = positive("sigma", sigma)?;
    let x0 = finite("x0", x0)?;
    Ok(Model {
        name: "curie_weiss".into(),
        dim: 1,
        drift: Arc::new(move |x, s, out| {
            let x = x[0];
            out[0] = beta * (-x * x * x + x + k * s);
        }),
        diffusion: Arc::new(move |_, _, out| out[0] = sigma),
        kernel1: Kernel::Separable {
            outer: constant_outer(T::one()),
            inner: identity_inner(0),
        },
        kernel2: Kernel::Zero,
        initial: InitialState::Point(vec![x0]),
        step_scaled_noise_rows: Vec::new(),
        diffusion_shape: DiffusionShape::CONSTANT_DIAGONAL,
    })
}

/// Mean-field Ornstein-Uhlenbeck: `dX = −θ(X − κ E[X]) dt + σ dW`.
///
/// For `|κ| < 1` the invariant law is `N(0, σ²/(2θ))`.
pub fn mean_field_ou<T: Real>(theta: T, kappa: T, sigma: T, x0: T) -> Result<Model<T>> {
    let theta = positive("theta", theta)?;
    let kappa = finite("kappa", kappa)?;
    let sigma = positive("sigma", sigma)?;
    let x0 = finite("x0", x0)?;
    Ok(Model {
        name: "mean_field_ou".into(),
        dim: 1,
        drift: Arc::new(move |x, s, out| out[0] = -theta * (x[0] - kappa * s)),
        diffusion: Arc::new(move |_, _, out| out[0] = sigma),
        kernel1: Kernel::Separable {
            outer: constant_outer(T::one()),
            inner: identity_inner(0),
        },
        kernel2: Kernel::Zero,
        initial: InitialState::Point(vec![x0]),
        step_scaled_noise_rows: Vec::new(),
        diffusion_shape: DiffusionShape::CONSTANT_DIAGONAL,
    })
}

/// Gradient flow for the maximum-likelihood toy model
/// `p_θ(x, y) = N(y; x, I) N(x; θ·1, I)`.
///
/// The state is `u = (θ, x_1, …, x_d)`. Each particle carries its own θ, driven
/// by the interaction mean `(1/N) Σ_j Σ_i x^j_i` minus `d·θ`; the latent block
/// follows the Langevin drift `−(x − y) − (x − θ·1)` with noise `√2 dW`. The θ
/// noise is `Δ·ΔB` (row 0 is step-scaled), so it vanishes as the step shrinks.
pub fn mle_gaussian<T: Real>(y: &[T]) -> Result<Model<T>> {
    if y.is_empty() {
        return Err(Error::invalid("y", "observation vector is empty"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("y", "observations must be finite"));
    }
    let dy = y.len();
    let dim = dy + 1;
    let y: Arc<[T]> = y.into();
    let dy_t = T::of_usize(dy);
    let sqrt2 = T::SQRT_2();
    let drift_y = y.clone();
    Ok(Model {
        name: "mle_gaussian".into(),
        dim,
        drift: Arc::new(move |u, s, out| {
            let theta = u[0];
            out[0] = s - dy_t * theta;
            for i in 0..dy {
                let x = u[i + 1];
                out[i + 1] = -(x - drift_y[i]) - (x - theta);
            }
        }),
        diffusion: Arc::new(move |_, _, out| {
            out.fill(T::zero());
            out[0] = T::one();
            for i in 1..dim {
                out[i * dim + i] = sqrt2;
            }
        }),
        kernel1: Kernel::Separable {
            outer: constant_outer(T::one()),
            inner: Arc::new(|z: &[T]| z[1..].iter().copied().sum()),
        },
        kernel2: Kernel::Zero,
        initial: InitialState::Point(vec![T::zero(); dim]),
        step_scaled_noise_rows: vec![0],
        diffusion_shape: DiffusionShape::CONSTANT_DIAGONAL,
    })
}

/// Closed-form maximiser of the toy likelihood: the mean of `y`.
pub fn mle_gaussian_theta_star<T: Real>(y: &[T]) -> T {
    y.iter().copied().sum::<T>() / T::of_usize(y.len())
}

/// Parameters of the three-dimensional neuron model.
///
/// The initial condition is Gaussian with mean `(v0, w0, y0)` and diagonal
/// covariance `(sigma_v0, sigma_w0, sigma_y0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeuronParams {
    pub v0: f64,
    pub sigma_v0: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub i: f64,
    pub b_ext: f64,
    pub w0: f64,
    pub sigma_w0: f64,
    pub v_rev: f64,
    pub a_r: f64,
    pub a_d: f64,
    pub t_max: f64,
    pub lambda: f64,
    pub y0: f64,
    pub sigma_y0: f64,
    pub j: f64,
    pub b_j: f64,
    pub v_t: f64,
    pub gamma: f64,
    pub big_lambda: f64,
}

impl Default for NeuronParams {
    fn default() -> Self {
        NeuronParams {
            v0: 0.0,
            sigma_v0: 0.4,
            a: 0.7,
            b: 0.8,
            c: 0.08,
            i: 0.5,
            b_ext: 0.5,
            w0: 0.5,
            sigma_w0: 0.4,
            v_rev: 1.0,
            a_r: 1.0,
            a_d: 1.0,
            t_max: 1.0,
            lambda: 0.2,
            y0: 0.3,
            sigma_y0: 0.05,
            j: 1.0,
            b_j: 0.2,
            v_t: 2.0,
            gamma: 0.1,
            big_lambda: 0.5,
        }
    }
}

impl NeuronParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.v0, self.sigma_v0, self.a, self.b, self.c, self.i, self.b_ext, self.w0,
            self.sigma_w0, self.v_rev, self.a_r, self.a_d, self.t_max, self.lambda, self.y0,
            self.sigma_y0, self.j, self.b_j, self.v_t, self.gamma, self.big_lambda,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("neuron", "all parameters must be finite"));
        }
        positive("sigma_v0", self.sigma_v0)?;
        positive("sigma_w0", self.sigma_w0)?;
        positive("sigma_y0", self.sigma_y0)?;
        Ok(())
    }
}

/// Synaptic gating rate `a_r T_max (1 − x₃) / (1 + exp(−λ(x₁ − V_T)))`.
fn gating<T: Real>(p: &NeuronConsts<T>, x1: T, x3: T) -> T {
    p.a_r * p.t_max * (T::one() - x3) / (T::one() + (-p.lambda * (x1 - p.v_t)).exp())
}

#[derive(Clone, Copy)]
struct NeuronConsts<T> {
    a: T,
    b: T,
    c: T,
    i: T,
    b_ext: T,
    a_r: T,
    a_d: T,
    t_max: T,
    lambda: T,
    v_t: T,
    gamma: T,
    big_lambda: T,
}

/// Diffusion entry coupling the gating variable to the second Brownian coordinate.
pub fn neuron_b32<T: Real>(params: &NeuronParams, x: &[T]) -> T {
    neuron_b32_impl(&neuron_consts(params), x)
}

fn neuron_consts<T: Real>(p: &NeuronParams) -> NeuronConsts<T> {
    NeuronConsts {
        a: T::of(p.a),
        b: T::of(p.b),
        c: T::of(p.c),
        i: T::of(p.i),
        b_ext: T::of(p.b_ext),
        a_r: T::of(p.a_r),
        a_d: T::of(p.a_d),
        t_max: T::of(p.t_max),
        lambda: T::of(p.lambda),
        v_t: T::of(p.v_t),
        gamma: T::of(p.gamma),
        big_lambda: T::of(p.big_lambda),
    }
}

fn neuron_b32_impl<T: Real>(p: &NeuronConsts<T>, x: &[T]) -> T {
    let (x1, x3) = (x[0], x[2]);
    if !(x3 > T::zero() && x3 < T::one()) {
        return T::zero();
    }
    let two = T::of(2.0);
    let edge = T::one() - (two * x3 - T::one()).powi(2);
    (gating(p, x1, x3) + p.a_d * x3).sqrt() * p.gamma * (-p.big_lambda / edge).exp()
}

/// Three-dimensional neuron model with synaptic interaction through `z₃`.
pub fn neuron3d<T: Real>(params: &NeuronParams) -> Result<Model<T>> {
    params.validate()?;
    let consts = neuron_consts::<T>(params);
    let j = T::of(params.j);
    let b_j = T::of(params.b_j);
    let v_rev = T::of(params.v_rev);
    let three = T::of(3.0);
    Ok(Model {
        name: "neuron3d".into(),
        dim: 3,
        drift: Arc::new(move |x, s, out| {
            let p = &consts;
            let (x1, x2, x3) = (x[0], x[1], x[2]);
            out[0] = x1 - x1 * x1 * x1 / three - x2 + p.i - s;
            out[1] = p.c * (x1 + p.a - p.b * x2);
            out[2] = gating(p, x1, x3) - p.a_d * x3;
        }),
        diffusion: Arc::new(move |x, s, out| {
            out.fill(T::zero());
            out[0] = consts.b_ext;
            out[2] = -s;
            out[7] = neuron_b32_impl(&consts, x);
        }),
        kernel1: Kernel::Separable {
            outer: Arc::new(move |x: &[T]| j * (x[0] - v_rev)),
            inner: identity_inner(2),
        },
        kernel2: Kernel::Separable {
            outer: Arc::new(move |x: &[T]| b_j * (x[0] - v_rev)),
            inner: identity_inner(2),
        },
        initial: InitialState::DiagonalGaussian {
            mean: vec![T::of(params.v0), T::of(params.w0), T::of(params.y0)],
            variance: vec![
                T::of(params.sigma_v0),
                T::of(params.sigma_w0),
                T::of(params.sigma_y0),
            ],
        },
        step_scaled_noise_rows: Vec::new(),
        diffusion_shape: DiffusionShape::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRole;

    fn cloud(points: &[&[f64]]) -> EmpiricalMeasure<f64> {
        EmpiricalMeasure::from_points(points.iter().map(|p| p.to_vec())).unwrap()
    }

    #[test]
    fn interaction_mean_examples() {
        let k = Kernel::General(Arc::new(|_: &[f64], z: &[f64]| z[0]));
        assert_eq!(interaction_mean(&k, &[5.0], &cloud(&[&[1.0], &[2.0], &[3.0]])).unwrap(), 2.0);

        let k = Kernel::General(Arc::new(|x: &[f64], z: &[f64]| (x[0] - z[0]).powi(2)));
        assert_eq!(interaction_mean(&k, &[0.0], &cloud(&[&[1.0], &[-1.0]])).unwrap(), 1.0);

        let neuron: Model<f64> = neuron3d(&NeuronParams::default()).unwrap();
        let m = cloud(&[&[0.0, 0.0, 0.2], &[0.0, 0.0, 0.4]]);
        let v = interaction_mean(&neuron.kernel1, &[0.0, 0.0, 0.0], &m).unwrap();
        assert!((v + 0.3).abs() < 1e-15, "{v}");
    }

    #[test]
    fn interaction_mean_rejects_empty() {
        let m = EmpiricalMeasure::<f64>::new(1, Vec::new()).unwrap_or_else(|_| unreachable!());
        let k = Kernel::<f64>::Zero;
        assert_eq!(interaction_mean(&k, &[0.0], &m), Err(Error::EmptyMeasure));
    }

    #[test]
    fn curie_weiss_drift() {
        let m: Model<f64> = curie_weiss(1.0, 0.25, 1.0, 1.0).unwrap();
        assert_eq!(m.drift_at(&[1.0], 1.0), vec![0.25]);
        assert_eq!(m.drift_at(&[0.0], 0.0), vec![0.0]);
        assert_eq!(m.diffusion_at(&[3.0], 0.0), vec![1.0]);
        assert!(curie_weiss(0.0, 0.25, 1.0, 1.0f64).is_err());
        assert!(curie_weiss(1.0, -0.25, 1.0, 1.0f64).is_err());
        assert!(curie_weiss(1.0, 0.25, 0.0, 1.0f64).is_err());
    }

    #[test]
    fn ou_drift() {
        let m: Model<f64> = mean_field_ou(1.0, 0.5, 1.0, 0.0).unwrap();
        assert_eq!(m.drift_at(&[2.0], 2.0), vec![-1.0]);
        assert!(mean_field_ou(-1.0, 0.5, 1.0, 0.0f64).is_err());
    }

    #[test]
    fn mle_model_shape() {
        let y = vec![1.0f64; 10];
        let m = mle_gaussian(&y).unwrap();
        assert_eq!(m.dim, 11);
        assert_eq!(mle_gaussian_theta_star(&y), 1.0);
        // θ = 0 with every latent mean 0 gives zero θ drift
        assert_eq!(m.drift_at(&[0.0; 11], 0.0)[0], 0.0);
        let b = m.diffusion_at(&[0.0; 11], 0.0);
        assert_eq!(b[0], 1.0);
        assert_eq!(b[12], std::f64::consts::SQRT_2);
        assert_eq!(b[1], 0.0);
        assert_eq!(m.step_scaled_noise_rows, vec![0]);
        assert!(mle_gaussian::<f64>(&[]).is_err());
        // the latent block is stationary at the posterior mean (y + θ)/2
        let mut u = vec![0.4f64; 11];
        for i in 0..10 {
            u[i + 1] = (y[i] + 0.4) / 2.0;
        }
        let a = m.drift_at(&u, 0.0);
        assert!(a[1..].iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn neuron_drift_and_diffusion() {
        let p = NeuronParams::default();
        let m: Model<f64> = neuron3d(&p).unwrap();
        let a = m.drift_at(&[0.0, 0.5, 0.3], 0.0);
        assert!((a[1] - 0.024).abs() < 1e-15, "{}", a[1]);
        assert_eq!(neuron_b32(&p, &[0.0f64, 0.0, 0.0]), 0.0);
        assert_eq!(neuron_b32(&p, &[0.0f64, 0.0, 1.0]), 0.0);
        assert!(neuron_b32(&p, &[0.0f64, 0.0, 0.5]) > 0.0);
        assert_eq!(p.gamma, 0.1);
        assert_eq!(p.big_lambda, 0.5);
        assert_eq!(p.v_t, 2.0);
        let b = m.diffusion_at(&[0.3, -0.2, 0.5], 0.7);
        assert_eq!(b[0], 0.5);
        assert_eq!(b[2], -0.7);
        assert_eq!(b[7], neuron_b32(&p, &[0.3, -0.2, 0.5]));
    }

    #[test]
    fn neuron_initial_draw_is_keyed() {
        let m: Model<f64> = neuron3d(&NeuronParams::default()).unwrap();
        let k = StreamKey::new(1, 2, StreamRole::InitDraw, 0);
        assert_eq!(m.initial.draw(k), m.initial.draw(k));
        assert_ne!(m.initial.draw(k), m.initial.draw(k.with_counter(1)));
        let mut bad = NeuronParams::default();
        bad.sigma_y0 = 0.0;
        assert!(neuron3d::<f64>(&bad).is_err());
    }

    #[test]
    fn declared_diffusion_shape_is_checked() {
        let mut m: Model<f64> = neuron3d(&NeuronParams::default()).unwrap();
        assert!(m.validate().is_ok());
        m.diffusion_shape = DiffusionShape::CONSTANT_DIAGONAL;
        assert!(m.validate().is_err());
        let mut c: Model<f64> = curie_weiss(1.0, 0.25, 1.0, 1.0).unwrap();
        c.diffusion = Arc::new(|x, _, out| out[0] = 1.0 + x[0] * x[0]);
        assert!(c.validate().is_err());
    }

    #[test]
    fn validate_catches_bad_rows() {
        let mut m: Model<f64> = mean_field_ou(1.0, 0.5, 1.0, 0.0).unwrap();
        m.step_scaled_noise_rows = vec![1];
        assert!(m.validate().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn interaction_mean_permutation_invariant(
                xs in proptest::collection::vec(-5.0f64..5.0, 1..20),
                x in -3.0f64..3.0,
                rot in 0usize..20,
            ) {
                let k = Kernel::General(Arc::new(|x: &[f64], z: &[f64]| (x[0] - z[0]).sin() * z[0]));
                let a = EmpiricalMeasure::new(1, xs.clone()).unwrap();
                let mut ys = xs.clone();
                ys.reverse();
                let r = rot % ys.len();
                ys.rotate_left(r);
                let b = EmpiricalMeasure::new(1, ys).unwrap();
                let va = interaction_mean(&k, &[x], &a).unwrap();
                let vb = interaction_mean(&k, &[x], &b).unwrap();
                prop_assert!((va - vb).abs() <= 1e-12 * (1.0 + va.abs()));
            }

            #[test]
            fn interaction_mean_of_copies(z in -5.0f64..5.0, x in -5.0f64..5.0, n in 1usize..64) {
                let k = Kernel::General(Arc::new(|x: &[f64], z: &[f64]| x[0] * 0.5 + z[0]));
                let m = EmpiricalMeasure::new(1, vec![z; n]).unwrap();
                let direct = k.eval(&[x], &[z]);
                let mean = interaction_mean(&k, &[x], &m).unwrap();
                // summing n equal terms accumulates up to n rounding errors
                prop_assert!((mean - direct).abs() <= n as f64 * f64::EPSILON * direct.abs().max(1.0));
            }

            #[test]
            fn curie_weiss_drift_is_odd(x in -4.0f64..4.0, s in -4.0f64..4.0) {
                let m: Model<f64> = curie_weiss(1.3, 0.25, 1.0, 0.0).unwrap();
                prop_assert_eq!(m.drift_at(&[-x], -s)[0], -m.drift_at(&[x], s)[0]);
            }

            #[test]
            fn neuron_second_noise_row_is_zero(
                x1 in -3.0f64..3.0, x2 in -3.0f64..3.0, x3 in -0.5f64..1.5, s in -2.0f64..2.0,
            ) {
                let m: Model<f64> = neuron3d(&NeuronParams::default()).unwrap();
                let b = m.diffusion_at(&[x1, x2, x3], s);
                prop_assert!(b[3..6].iter().all(|v| *v == 0.0));
            }

            #[test]
            fn mle_theta_drift_at_empirical_mean(
                theta in -3.0f64..3.0,
                y in proptest::collection::vec(-3.0f64..3.0, 1..12),
                xs in proptest::collection::vec(-3.0f64..3.0, 12),
            ) {
                let dy = y.len();
                let m = mle_gaussian(&y).unwrap();
                let mut u = vec![theta];
                u.extend_from_slice(&xs[..dy]);
                let cloud = EmpiricalMeasure::new(dy + 1, u.clone()).unwrap();
                let s = interaction_mean(&m.kernel1, &u, &cloud).unwrap();
                let mbar = xs[..dy].iter().sum::<f64>() / dy as f64;
                let expected = dy as f64 * (mbar - theta);
                prop_assert!((m.drift_at(&u, s)[0] - expected).abs() < 1e-12);
            }
        }
    }
}
