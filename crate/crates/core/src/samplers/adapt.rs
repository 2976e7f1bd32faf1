//! Burn-in step-size adaptation.
//!
//! After every window of iterations `log γ ← log γ + c·k^{−0.6}(a_k − a*)`,
//! where `a_k` is the acceptance rate over window `k` and `a*` the target.
//! The MH scheme adapts `γ₁` only and derives `γ₂` from it; the Gibbs
//! scheme adapts both from their own block rates.

use super::config::{Drift, Scheme, SamplerConfig};
use super::kernel::{ChainState, SamplerOps};
use crate::linalg::power_iteration;
use crate::model::{EpiModel, Hyperparams, Theta};

pub const GAIN_EXPONENT: f64 = 0.6;
pub const GAIN_SCALE: f64 = 10.0;
/// On a day with `Z_t = 0` the likelihood is `exp(−I_t)` on `I_t ≥ 0`,
/// whose scale is one whatever the current intensity.
const ZERO_COUNT_CURVATURE: f64 = 1.0;

/// Accept counts of one window.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WindowStats {
    pub steps: u64,
    pub accepted_r: u64,
    pub accepted_o: u64,
}

impl WindowStats {
    pub fn rate_r(&self) -> f64 {
        rate(self.accepted_r, self.steps)
    }

    pub fn rate_o(&self) -> f64 {
        rate(self.accepted_o, self.steps)
    }
}

fn rate(a: u64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        a as f64 / n as f64
    }
}

/// One Robbins-Monro update for window `k ≥ 1`.
pub fn robbins_monro(gamma: f64, acceptance: f64, k: usize, target: f64, scale: f64) -> f64 {
    let gain = scale * (k.max(1) as f64).powf(-GAIN_EXPONENT);
    gamma * (gain * (acceptance - target)).exp()
}

/// `γ₂` tied to `γ₁` under the MH scheme.
pub fn mh_gamma2(drift: Drift, gamma1: f64, hyper: &Hyperparams) -> f64 {
    match drift {
        Drift::PgDec => gamma1,
        Drift::PgDual | Drift::Rw => (hyper.lambda_r / hyper.lambda_o).powi(2) * gamma1,
    }
}

/// Applies the update for window `k` to `state`.
pub fn adapt_step_sizes(state: &mut ChainState, stats: &WindowStats, k: usize, config: &SamplerConfig, hyper: &Hyperparams) {
    let target = config.target_acceptance;
    match config.scheme {
        Scheme::Mh => {
            state.gamma1 = robbins_monro(state.gamma1, stats.rate_r(), k, target, config.adapt_gain);
            state.gamma2 = mh_gamma2(config.drift, state.gamma1, hyper);
        }
        Scheme::Gibbs => {
            state.gamma1 = robbins_monro(state.gamma1, stats.rate_r(), k, target, config.adapt_gain);
            state.gamma2 = robbins_monro(state.gamma2, stats.rate_o(), k, target, config.adapt_gain);
        }
    }
}

/// Starting step sizes from the curvature of `f` at `theta`.
///
/// With `h_t = Z_t / I_t²` (one on zero-count days), the Hessian of `f` is `diag((Φ^Z)² h)` in `R`
/// and `diag(h)` in `O`. A Laplace prior of rate `λ` contributes a
/// precision of order `λ²`. `γ₁` is the inverse of the largest eigenvalue of
/// the `R` Hessian in the coordinates `D̄R` plus `λ_R²`, `γ₂` the inverse of
/// `max h + λ_O²`. The MH scheme takes the smaller `γ₁` compatible with both blocks
/// under its coupling.
pub fn initial_step_sizes(model: &EpiModel, ops: &SamplerOps, config: &SamplerConfig, theta: &Theta) -> (f64, f64) {
    let intensity = model.intensity(theta);
    let h: Vec<f64> = model
        .z()
        .iter()
        .zip(&intensity)
        .map(|(&z, &i)| if z > 0.0 && i > 0.0 { z / (i * i) } else { ZERO_COUNT_CURVATURE })
        .collect();
    let hr: Vec<f64> = h.iter().zip(model.phi_z()).map(|(h, p)| h * p * p).collect();
    let dbar = &ops.dbar;
    let top_r = power_iteration(
        model.dim(),
        |y| {
            let x = dbar.solve(y);
            let w: Vec<f64> = x.iter().zip(&hr).map(|(a, b)| a * b).collect();
            dbar.solve_transpose(&w)
        },
        200,
    );
    let top_o = h.iter().cloned().fold(0.0, f64::max);
    let hyper = model.hyper();
    let g1 = 1.0 / (top_r + hyper.lambda_r.powi(2));
    let g2 = 1.0 / (top_o + hyper.lambda_o.powi(2));
    let g1 = config.initial_gamma1.unwrap_or(g1);
    match config.scheme {
        Scheme::Gibbs => (g1, config.initial_gamma2.unwrap_or(g2)),
        Scheme::Mh => {
            let g1 = if config.initial_gamma1.is_some() {
                g1
            } else {
                let ratio = mh_gamma2(config.drift, 1.0, &hyper);
                g1.min(g2 / ratio)
            };
            (g1, mh_gamma2(config.drift, g1, &hyper))
        }
    }
}
