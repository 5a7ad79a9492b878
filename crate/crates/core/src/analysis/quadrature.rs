use crate::scalar::Real;

const PANELS: usize = 64;

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
///
/// The interval is first cut into 64 panels so that narrow features are not
/// missed by the initial samples.
pub fn adaptive_simpson<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, tol: T) -> T {
    let two = T::of(2.0);
    let width = (b - a) / T::of_usize(PANELS);
    let panel_tol = tol / T::of_usize(PANELS);
    (0..PANELS)
        .map(|i| {
            let lo = a + width * T::of_usize(i);
            let hi = if i + 1 == PANELS { b } else { lo + width };
            let m = (lo + hi) / two;
            let (fa, fm, fb) = (f(lo), f(m), f(hi));
            let whole = simpson(lo, hi, fa, fm, fb);
            refine(&f, lo, hi, fa, fm, fb, whole, panel_tol, 50)
        })
        .sum()
}

fn simpson<T: Real>(a: T, b: T, fa: T, fm: T, fb: T) -> T {
    (b - a) / T::of(6.0) * (fa + T::of(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn refine<T: Real, F: Fn(T) -> T>(
    f: &F,
    a: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: T,
    depth: u32,
) -> T {
    let two = T::of(2.0);
    let m = (a + b) / two;
    let (lm, rm) = ((a + m) / two, (m + b) / two);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= T::of(15.0) * tol {
        return left + right + delta / T::of(15.0);
    }
    refine(f, a, m, fa, flm, fm, left, tol / two, depth - 1)
        + refine(f, m, b, fm, frm, fb, right, tol / two, depth - 1)
}

/// Trapezoid rule on a (possibly non-uniform) grid.
pub fn trapezoid<T: Real>(x: &[T], y: &[T]) -> T {
    assert_eq!(x.len(), y.len());
    let half = T::of(0.5);
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| (xs[1] - xs[0]) * (ys[0] + ys[1]) * half)
        .sum()
}

/// Reference values for the symmetric Curie-Weiss invariant law
/// `p(x) = C exp(−β x⁴/(2σ²) + β x²/σ²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurieWeissReference {
    /// Reciprocal of the normalising integral.
    pub normalizer: f64,
    pub second_moment: f64,
}

impl CurieWeissReference {
    pub fn compute(beta: f64, sigma: f64) -> Self {
        let s2 = sigma * sigma;
        let g = |x: f64| (-beta * x.powi(4) / (2.0 * s2) + beta * x * x / s2).exp();
        let z = adaptive_simpson(g, -10.0, 10.0, 1e-12);
        let m2 = adaptive_simpson(|x| x * x * g(x), -10.0, 10.0, 1e-12) / z;
        CurieWeissReference {
            normalizer: 1.0 / z,
            second_moment: m2,
        }
    }

    pub fn density(&self, beta: f64, sigma: f64, x: f64) -> f64 {
        let s2 = sigma * sigma;
        self.normalizer * (-beta * x.powi(4) / (2.0 * s2) + beta * x * x / s2).exp()
    }
}
