//! Blockwise proximal-gradient and random-walk Metropolis samplers.
//!
//! Twelve variants: drift `{RW, PGdec, PGdual}` × scheme `{MH, Gibbs}` ×
//! covariance augmentation `{I, O}`. The `R` block is proposed from
//! `N(μ_R(θ), 2γ₁D̄⁻¹D̄⁻ᵀ)` and the `O` block from `N(μ_O(θ), 2γ₂I)`.

pub mod adapt;
pub mod chain;
pub mod config;
pub mod drift;
pub mod kernel;
pub mod proposal;

pub use chain::{run_chain, run_chains, ChainTrace, WindowRecord};
pub use config::{Drift, SamplerConfig, Scheme};
pub use kernel::{gibbs_step, mh_step, ChainState, SamplerOps, StepOutcome};
