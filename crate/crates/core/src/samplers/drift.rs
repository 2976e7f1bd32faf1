//! Proposal drifts. Each `*_from_grad` form takes a precomputed gradient so
//! the kernels evaluate `∇f` once per visited point.

use crate::error::Result;
use crate::linops::{AugmentedDiffOp, DecimatedDiffOp};
use crate::model::{EpiModel, Theta};
use crate::prox::{prox_l1_partial, prox_l1_semiorthogonal, soft_threshold};

pub fn drift_rw(theta: &Theta) -> Theta {
    theta.clone()
}

pub fn pgdec_r_from_grad(r: &[f64], grad_r: &[f64], a: &DecimatedDiffOp, gamma1: f64, lambda_r: f64) -> Vec<f64> {
    let step: Vec<f64> = r.iter().zip(grad_r).map(|(x, g)| x - gamma1 * g).collect();
    prox_l1_semiorthogonal(&step, a, gamma1 * lambda_r)
}

pub fn pgdual_r_from_grad(r: &[f64], grad_r: &[f64], dbar: &AugmentedDiffOp, gamma1: f64, lambda_r: f64) -> Vec<f64> {
    let x = dbar.apply(r);
    let g = dbar.solve_transpose(grad_r);
    let step: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - gamma1 * b).collect();
    dbar.solve(&prox_l1_partial(&step, gamma1 * lambda_r, dbar.n_free()))
}

/// Shared by both proximal drifts.
pub fn pg_o_from_grad(o: &[f64], grad_o: &[f64], gamma2: f64, lambda_o: f64) -> Vec<f64> {
    let step: Vec<f64> = o.iter().zip(grad_o).map(|(x, g)| x - gamma2 * g).collect();
    soft_threshold(&step, gamma2 * lambda_o)
}

/// `prox_{γ₁λ_R‖A·‖₁}(R − γ₁∇_R f)`.
pub fn drift_pgdec_r(theta: &Theta, model: &EpiModel, a: &DecimatedDiffOp, gamma1: f64) -> Result<Vec<f64>> {
    let (gr, _) = model.grad_f(theta)?;
    Ok(pgdec_r_from_grad(&theta.r, &gr, a, gamma1, model.hyper().lambda_r))
}

/// `prox_{γ₂λ_O‖·‖₁}(O − γ₂∇_O f)`.
pub fn drift_pgdec_o(theta: &Theta, model: &EpiModel, gamma2: f64) -> Result<Vec<f64>> {
    let (_, go) = model.grad_f(theta)?;
    Ok(pg_o_from_grad(&theta.o, &go, gamma2, model.hyper().lambda_o))
}

/// `D̄⁻¹ prox_{γ₁λ_R‖·_{k+1:T}‖₁}(D̄R − γ₁D̄⁻ᵀ∇_R f)` with `k` the number of
/// leading rows of `D̄` left unpenalized.
pub fn drift_pgdual_r(theta: &Theta, model: &EpiModel, dbar: &AugmentedDiffOp, gamma1: f64) -> Result<Vec<f64>> {
    let (gr, _) = model.grad_f(theta)?;
    Ok(pgdual_r_from_grad(&theta.r, &gr, dbar, gamma1, model.hyper().lambda_r))
}

pub fn drift_pgdual_o(theta: &Theta, model: &EpiModel, gamma2: f64) -> Result<Vec<f64>> {
    drift_pgdec_o(theta, model, gamma2)
}
