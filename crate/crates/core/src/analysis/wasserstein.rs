use crate::error::{Error, Result};
use crate::scalar::Real;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `W_p` between two uniform empirical measures on the line, `p ∈ {1, 2}`.
///
/// Uses the monotone (quantile) coupling. Unequal sizes are handled by
/// splitting atoms on the common refinement of the two CDFs, which equals
/// duplicating every atom `lcm(n, m)/n` times.
pub fn wasserstein_1d<T: Real>(a: &[T], b: &[T], p: u32) -> Result<T> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    if p != 1 && p != 2 {
        return Err(Error::Domain(format!("order p must be 1 or 2, got {p}")));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|u, v| u.partial_cmp(v).expect("NaN in sample"));
    ys.sort_by(|u, v| u.partial_cmp(v).expect("NaN in sample"));
    let (n, m) = (xs.len() as u64, ys.len() as u64);
    let total = n / gcd(n, m) * m;
    let (unit_a, unit_b) = (total / n, total / m);
    let (mut i, mut j) = (0usize, 0usize);
    let (mut left_a, mut left_b) = (unit_a, unit_b);
    let mut acc = T::zero();
    while i < xs.len() && j < ys.len() {
        let take = left_a.min(left_b);
        let gap = (xs[i] - ys[j]).abs();
        let cost = if p == 1 { gap } else { gap * gap };
        acc += cost * T::of(take as f64);
        left_a -= take;
        left_b -= take;
        if left_a == 0 {
            i += 1;
            left_a = unit_a;
        }
        if left_b == 0 {
            j += 1;
            left_b = unit_b;
        }
    }
    let mean = acc / T::of(total as f64);
    Ok(if p == 1 { mean } else { mean.sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lcm_brute(a: &[f64], b: &[f64], p: u32) -> f64 {
        let n = a.len() / gcd(a.len() as u64, b.len() as u64) as usize * b.len();
        let expand = |v: &[f64]| {
            let mut s = v.to_vec();
            s.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let r = n / v.len();
            s.iter().flat_map(|&x| std::iter::repeat(x).take(r)).collect::<Vec<_>>()
        };
        let (ea, eb) = (expand(a), expand(b));
        let s: f64 = ea.iter().zip(&eb).map(|(x, y)| (x - y).abs().powi(p as i32)).sum();
        (s / n as f64).powf(1.0 / p as f64)
    }

    #[test]
    fn examples() {
        assert_eq!(wasserstein_1d(&[0.0, 1.0], &[0.0, 1.0], 2).unwrap(), 0.0);
        assert_eq!(wasserstein_1d(&[0.0], &[3.0], 1).unwrap(), 3.0);
        assert_eq!(wasserstein_1d(&[0.0, 0.0], &[1.0, 1.0], 2).unwrap(), 1.0);
        assert_eq!(wasserstein_1d(&[1.0, 0.0], &[0.0, 1.0], 1).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        assert_eq!(wasserstein_1d::<f64>(&[], &[1.0], 1), Err(Error::EmptyMeasure));
        assert!(wasserstein_1d(&[1.0], &[1.0], 3).is_err());
    }

    #[test]
    fn unequal_sizes_match_lcm_duplication() {
        let a = [0.3, -1.0, 2.5];
        let b = [0.0, 1.0];
        for p in [1, 2] {
            let w = wasserstein_1d(&a, &b, p).unwrap();
            assert!((w - lcm_brute(&a, &b, p)).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn metric_properties(
            a in proptest::collection::vec(-5.0f64..5.0, 1..12),
            b in proptest::collection::vec(-5.0f64..5.0, 1..12),
            c in proptest::collection::vec(-5.0f64..5.0, 1..12),
        ) {
            for p in [1, 2] {
                let ab = wasserstein_1d(&a, &b, p).unwrap();
                let ba = wasserstein_1d(&b, &a, p).unwrap();
                prop_assert!((ab - ba).abs() < 1e-12);
                prop_assert!(wasserstein_1d(&a, &a, p).unwrap() == 0.0);
                let ac = wasserstein_1d(&a, &c, p).unwrap();
                let cb = wasserstein_1d(&c, &b, p).unwrap();
                prop_assert!(ab <= ac + cb + 1e-9);
                prop_assert!((ab - lcm_brute(&a, &b, p)).abs() < 1e-9);
            }
            let w1 = wasserstein_1d(&a, &b, 1).unwrap();
            let w2 = wasserstein_1d(&a, &b, 2).unwrap();
            prop_assert!(w1 <= w2 + 1e-12);
        }
    }
}
