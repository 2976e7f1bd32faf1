//! Gaussian proposals `N(μ, 2γ₁D̄⁻¹D̄⁻ᵀ)` for `R` and `N(μ, 2γ₂I)` for `O`,
//! and the quadratic forms entering the Metropolis-Hastings ratio.
//!
//! The covariance of each block does not depend on the current point or on
//! the decimated block drawn by PGdec, so Gaussian normalizers cancel in
//! every ratio and only the exponents are computed.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linops::AugmentedDiffOp;
use crate::model::Theta;

pub fn standard_normal_vec<G: Rng + ?Sized>(rng: &mut G, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// `μ + √(2γ₁) D̄⁻¹η` for a given `η`.
pub fn propose_block_r_with(mu: &[f64], dbar: &AugmentedDiffOp, gamma1: f64, eta: &[f64]) -> Vec<f64> {
    let scale = (2.0 * gamma1).sqrt();
    let noise = dbar.solve(eta);
    mu.iter().zip(noise).map(|(m, n)| m + scale * n).collect()
}

pub fn propose_block_r<G: Rng + ?Sized>(mu: &[f64], dbar: &AugmentedDiffOp, gamma1: f64, rng: &mut G) -> Vec<f64> {
    let eta = standard_normal_vec(rng, mu.len());
    propose_block_r_with(mu, dbar, gamma1, &eta)
}

pub fn propose_block_o_with(mu: &[f64], gamma2: f64, eta: &[f64]) -> Vec<f64> {
    let scale = (2.0 * gamma2).sqrt();
    mu.iter().zip(eta).map(|(m, n)| m + scale * n).collect()
}

pub fn propose_block_o<G: Rng + ?Sized>(mu: &[f64], gamma2: f64, rng: &mut G) -> Vec<f64> {
    let eta = standard_normal_vec(rng, mu.len());
    propose_block_o_with(mu, gamma2, &eta)
}

/// Log density of the `R` proposal at `to`, up to its normalizer:
/// `−‖D̄(to − μ)‖² / (4γ₁)`.
pub fn log_q_r(to: &[f64], mu: &[f64], dbar: &AugmentedDiffOp, gamma1: f64) -> f64 {
    let d: Vec<f64> = to.iter().zip(mu).map(|(a, b)| a - b).collect();
    let y = dbar.apply(&d);
    -y.iter().map(|v| v * v).sum::<f64>() / (4.0 * gamma1)
}

/// `−‖to − μ‖² / (4γ₂)`.
pub fn log_q_o(to: &[f64], mu: &[f64], gamma2: f64) -> f64 {
    -to.iter().zip(mu).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (4.0 * gamma2)
}

/// `ln q(θ' → θ) − ln q(θ → θ')` where `mu_fwd = μ(θ)` and `mu_rev = μ(θ')`.
/// A block with zero step size is frozen and contributes nothing.
pub fn log_proposal_ratio(
    theta: &Theta,
    theta_half: &Theta,
    mu_fwd: &Theta,
    mu_rev: &Theta,
    dbar: &AugmentedDiffOp,
    gamma1: f64,
    gamma2: f64,
) -> f64 {
    let mut out = 0.0;
    if gamma1 > 0.0 {
        out += log_q_r(&theta.r, &mu_rev.r, dbar, gamma1) - log_q_r(&theta_half.r, &mu_fwd.r, dbar, gamma1);
    }
    if gamma2 > 0.0 {
        out += log_q_o(&theta.o, &mu_rev.o, gamma2) - log_q_o(&theta_half.o, &mu_fwd.o, gamma2);
    }
    out
}
