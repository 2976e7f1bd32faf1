//! Closed-form proximity operators.
//!
//! `prox_{γg}(x) = argmin_y γ g(y) + ½‖y − x‖²`.

use crate::linops::DecimatedDiffOp;

#[inline]
pub fn soft_threshold_scalar(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// Prox of `tau ‖·‖₁`. Ties `|xᵢ| = tau` map to an exact zero.
pub fn soft_threshold(x: &[f64], tau: f64) -> Vec<f64> {
    debug_assert!(tau >= 0.0);
    x.iter().map(|&v| soft_threshold_scalar(v, tau)).collect()
}

/// Prox of `y ↦ tau ‖y_{keep..}‖₁`: the first `keep` entries are left alone.
pub fn prox_l1_partial(x: &[f64], tau: f64, keep: usize) -> Vec<f64> {
    debug_assert!(keep <= x.len());
    x.iter()
        .enumerate()
        .map(|(i, &v)| if i < keep { v } else { soft_threshold_scalar(v, tau) })
        .collect()
}

/// Prox of `y ↦ tau ‖A y‖₁` for a decimated block with `A Aᵀ = I`:
/// `x − Aᵀ(Ax − soft(Ax, tau))`.
pub fn prox_l1_semiorthogonal(x: &[f64], a: &DecimatedDiffOp, tau: f64) -> Vec<f64> {
    let ax = a.apply(x);
    let residual: Vec<f64> = ax
        .iter()
        .map(|&v| v - soft_threshold_scalar(v, tau))
        .collect();
    let back = a.apply_transpose(&residual);
    x.iter().zip(back).map(|(xi, bi)| xi - bi).collect()
}

/// Prox of `p ↦ γ d_KL(z | p)`, the Poisson Kullback-Leibler divergence
/// (`+∞` for `p < 0`, and for `p = 0` when `z > 0`).
///
/// For `z > 0` this is the positive root of `p² + (γ − x) p − γ z = 0`; for
/// `z = 0` it is `max(x − γ, 0)`. `z` may be any nonnegative real.
pub fn prox_poisson_kl(x: f64, z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0 && z >= 0.0);
    if z == 0.0 || gamma == 0.0 {
        return if gamma == 0.0 { x } else { (x - gamma).max(0.0) };
    }
    let half = 0.5 * (x - gamma);
    let disc = (half * half + gamma * z).sqrt();
    if half >= 0.0 {
        half + disc
    } else {
        // Rationalized to avoid cancellation when x ≪ γ.
        gamma * z / (disc - half)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, norm2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Minimizer of a strictly convex 1-D function from a monotone
    /// (sub)derivative, by bisection on its sign change.
    fn bisect_derivative<F: Fn(f64) -> f64>(d: F, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if d(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = hi - g * (hi - lo);
        let mut d = lo + g * (hi - lo);
        for _ in 0..400 {
            if f(c) < f(d) {
                hi = d;
            } else {
                lo = c;
            }
            c = hi - g * (hi - lo);
            d = lo + g * (hi - lo);
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn soft_threshold_dead_zone_and_zero() {
        assert_eq!(soft_threshold(&[0.0, 0.0], 1.0), vec![0.0, 0.0]);
        assert_eq!(soft_threshold(&[0.5, -1.0, 1.0], 1.0), vec![0.0, 0.0, 0.0]);
        assert_eq!(soft_threshold(&[2.0, -3.0], 0.0), vec![2.0, -3.0]);
    }

    #[test]
    fn soft_threshold_matches_scalar_search() {
        let p = soft_threshold(&[2.0], 0.5)[0];
        assert_eq!(p, 1.5);
        // Value comparisons resolve the minimizer to about √ε only.
        let coarse = golden_section(|y| 0.5 * y.abs() + 0.5 * (y - 2.0).powi(2), -5.0, 5.0);
        assert!((p - coarse).abs() < 1e-6);
        let fine = bisect_derivative(|y| 0.5 * y.signum() + (y - 2.0), -5.0, 5.0);
        assert!((p - fine).abs() < 1e-8);
    }

    #[test]
    fn partial_l1_cases() {
        let x = [5.0, 5.0, 0.1, -3.0];
        assert_eq!(prox_l1_partial(&x, 1.0, 2), vec![5.0, 5.0, 0.0, -2.0]);
        assert_eq!(prox_l1_partial(&x, 1.0, 4), x.to_vec());
        assert_eq!(prox_l1_partial(&x, 1.0, 0), soft_threshold(&x, 1.0));
    }

    #[test]
    fn semiorthogonal_trivial_cases() {
        let a = DecimatedDiffOp::new(1, 6).unwrap();
        let affine: Vec<f64> = (0..6).map(|t| 1.0 + 0.5 * t as f64).collect();
        assert!(max_abs_diff(&prox_l1_semiorthogonal(&affine, &a, 3.0), &affine) < 1e-14);
        let x = [1.0, -2.0, 0.5, 3.0, 0.0, 1.0];
        assert!(max_abs_diff(&prox_l1_semiorthogonal(&x, &a, 0.0), &x) < 1e-15);
    }

    #[test]
    fn semiorthogonal_satisfies_optimality() {
        // 0 ∈ tau Aᵀ ∂‖·‖₁(Ap) + p − x, with A Aᵀ = I ⇒ w = A(x − p) ∈ tau ∂‖·‖₁(Ap)
        // and x − p ∈ range(Aᵀ).
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for block in 1..=3 {
            let a = DecimatedDiffOp::new(block, 12).unwrap();
            for _ in 0..20 {
                let x: Vec<f64> = (0..12).map(|_| rng.random_range(-2.0..2.0)).collect();
                let tau = rng.random_range(0.0..1.0);
                let p = prox_l1_semiorthogonal(&x, &a, tau);
                let diff: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a - b).collect();
                let w = a.apply(&diff);
                let back = a.apply_transpose(&w);
                assert!(max_abs_diff(&back, &diff) < 1e-12);
                let ap = a.apply(&p);
                for (wi, api) in w.iter().zip(ap) {
                    if api.abs() > 1e-12 {
                        assert!((wi - tau * api.signum()).abs() < 1e-8);
                    } else {
                        assert!(wi.abs() <= tau + 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn kl_prox_cases() {
        assert_eq!(prox_poisson_kl(0.5, 0.0, 1.0), 0.0);
        assert_eq!(prox_poisson_kl(3.0, 0.0, 1.0), 2.0);
        for gamma in [0.01, 1.0, 100.0] {
            assert!((prox_poisson_kl(7.0, 7.0, gamma) - 7.0).abs() < 1e-12);
        }
        let p = prox_poisson_kl(4.0, 4.0, 1.0);
        let oracle = golden_section(
            |q| (4.0 * (4.0 / q).ln() + q - 4.0) + 0.5 * (q - 4.0).powi(2),
            1e-9,
            20.0,
        );
        assert!((p - 4.0).abs() < 1e-12);
        assert!((p - oracle).abs() < 1e-6);
        let fine = bisect_derivative(|q| (1.0 - 4.0 / q) + (q - 4.0), 1e-9, 20.0);
        assert!((p - fine).abs() < 1e-8);
    }

    #[test]
    fn kl_prox_is_stable_far_below_gamma() {
        // Root of p² + bp − c = 0 with b = γ − x ≫ c: p = c/b − c²/b³ + 2c³/b⁵ − …
        let p = prox_poisson_kl(-1e8, 3.0, 1e8);
        let (b, c) = (2e8f64, 3e8f64);
        let expected = c / b - c * c / b.powi(3) + 2.0 * c.powi(3) / b.powi(5);
        assert!((p - expected).abs() / expected < 1e-12, "{p}");
        let q = p * p + (1e8 + 1e8) * p - 1e8 * 3.0;
        assert!(q.abs() < 1e-6 * 3e8);
    }

    #[test]
    fn prox_maps_are_nonexpansive() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = DecimatedDiffOp::new(2, 9).unwrap();
        for _ in 0..200 {
            let x: Vec<f64> = (0..9).map(|_| rng.random_range(-3.0..3.0)).collect();
            let y: Vec<f64> = (0..9).map(|_| rng.random_range(-3.0..3.0)).collect();
            let dxy = norm2(&x.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>());
            let tau = rng.random_range(0.0..2.0);
            let dist = |p: Vec<f64>, q: Vec<f64>| norm2(&p.iter().zip(&q).map(|(a, b)| a - b).collect::<Vec<_>>());
            assert!(dist(soft_threshold(&x, tau), soft_threshold(&y, tau)) <= dxy + 1e-12);
            assert!(dist(prox_l1_partial(&x, tau, 2), prox_l1_partial(&y, tau, 2)) <= dxy + 1e-12);
            assert!(
                dist(prox_l1_semiorthogonal(&x, &a, tau), prox_l1_semiorthogonal(&y, &a, tau)) <= dxy + 1e-12
            );
            let z = rng.random_range(0..20) as f64;
            let px = prox_poisson_kl(x[0], z, tau + 0.01);
            let py = prox_poisson_kl(y[0], z, tau + 0.01);
            assert!((px - py).abs() <= (x[0] - y[0]).abs() + 1e-12);
        }
    }
}
