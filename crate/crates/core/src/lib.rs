//! Estimation of the time-varying epidemic reproduction number `R` and of
//! sparse count outliers `O` from daily new-infection counts.
//!
//! The target density is
//!
//! ```text
//! π(R, O) ∝ exp(−f(R, O) − λ_R ‖D R‖₁ − λ_O ‖O‖₁) · 1{(R, O) ∈ 𝒟}
//! ```
//!
//! where `f` is the Poisson negative log-likelihood of the counts under the
//! intensity `I_t = R_t Σ_u Φ_u Z_{t−u} + O_t`, and `D` is the normalized
//! second-order difference operator. The crate provides
//!
//! * the model and its gradient ([`model`]),
//! * the difference operators and their invertible augmentations ([`linops`]),
//! * closed-form proximity operators ([`prox`]),
//! * the twelve blockwise proximal-gradient / random-walk samplers
//!   ([`samplers`]),
//! * a primal-dual MAP solver with a uniqueness check ([`map_solver`]),
//! * convergence diagnostics ([`diagnostics`]) and credibility bands
//!   ([`estimators`]),
//! * ingestion of JHU-format cumulative case files ([`ingest`]).

pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod ingest;
pub mod linalg;
pub mod linops;
pub mod map_solver;
pub mod model;
pub mod prox;
pub mod samplers;

pub use error::{Error, Result};
pub use model::{CountSeries, EpiModel, Hyperparams, SerialInterval, Theta};
