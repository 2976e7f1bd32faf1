use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::Augmentation;
use super::adapt::GAIN_SCALE;

/// Drift of the Gaussian proposal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Drift {
    /// `μ(θ) = θ`.
    Rw,
    /// Proximal-gradient step with a randomly selected decimated block of `D`.
    PgDec,
    /// Proximal-gradient step in the coordinates `D̄R`.
    PgDual,
}

/// Metropolis-Hastings with a joint proposal, or Metropolis-within-Gibbs
/// over the blocks `R` then `O`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Mh,
    Gibbs,
}

impl Drift {
    pub const ALL: [Drift; 3] = [Drift::Rw, Drift::PgDec, Drift::PgDual];
}

impl Scheme {
    pub const ALL: [Scheme; 2] = [Scheme::Mh, Scheme::Gibbs];
}

impl fmt::Display for Drift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Drift::Rw => "rw",
            Drift::PgDec => "pgdec",
            Drift::PgDual => "pgdual",
        })
    }
}

impl FromStr for Drift {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rw" => Ok(Drift::Rw),
            "pgdec" => Ok(Drift::PgDec),
            "pgdual" => Ok(Drift::PgDual),
            other => Err(Error::Config(format!("unknown drift '{other}' (expected rw, pgdec or pgdual)"))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Mh => "mh",
            Scheme::Gibbs => "gibbs",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mh" => Ok(Scheme::Mh),
            "gibbs" => Ok(Scheme::Gibbs),
            other => Err(Error::Config(format!("unknown scheme '{other}' (expected mh or gibbs)"))),
        }
    }
}

/// Parses `i` / `o` into an augmentation variant.
pub fn parse_covariance(s: &str) -> Result<Augmentation> {
    match s.to_ascii_lowercase().as_str() {
        "i" => Ok(Augmentation::Invert),
        "o" => Ok(Augmentation::Ortho),
        other => Err(Error::Config(format!("unknown covariance '{other}' (expected i or o)"))),
    }
}

pub fn covariance_label(a: Augmentation) -> &'static str {
    match a {
        Augmentation::Invert => "i",
        Augmentation::Ortho => "o",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub drift: Drift,
    pub scheme: Scheme,
    pub covariance: Augmentation,
    /// Total iterations, burn-in included.
    pub n_max: usize,
    pub n_burnin: usize,
    pub target_acceptance: f64,
    pub seed: u64,
    pub thinning: usize,
    /// Starting `γ₁`; `None` picks a value from the local curvature at the
    /// initial point.
    pub initial_gamma1: Option<f64>,
    /// Starting `γ₂` for the Gibbs scheme; ignored by MH, which couples it to `γ₁`.
    pub initial_gamma2: Option<f64>,
    /// Iterations per adaptation window.
    pub adapt_window: usize,
    /// Scale `c` of the adaptation gain `c·k^{−0.6}`.
    pub adapt_gain: f64,
    /// Stride of the full `R` trace (burn-in included); `None` disables it.
    pub r_trace_stride: Option<usize>,
}

impl SamplerConfig {
    pub fn new(drift: Drift, scheme: Scheme, covariance: Augmentation) -> Self {
        Self {
            drift,
            scheme,
            covariance,
            n_max: 200_000,
            n_burnin: 50_000,
            target_acceptance: 0.25,
            seed: 0,
            thinning: 10,
            initial_gamma1: None,
            initial_gamma2: None,
            adapt_window: 500,
            adapt_gain: GAIN_SCALE,
            r_trace_stride: None,
        }
    }

    pub fn with_iterations(mut self, n_max: usize, n_burnin: usize) -> Self {
        self.n_max = n_max;
        self.n_burnin = n_burnin;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_thinning(mut self, thinning: usize) -> Self {
        self.thinning = thinning;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_burnin > self.n_max {
            return Err(Error::Config(format!(
                "burn-in ({}) exceeds the total number of iterations ({})",
                self.n_burnin, self.n_max
            )));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::Config(format!(
                "target acceptance must lie in (0, 1), got {}",
                self.target_acceptance
            )));
        }
        if !(self.adapt_gain > 0.0) {
            return Err(Error::Config(format!("adaptation gain must be positive, got {}", self.adapt_gain)));
        }
        if self.thinning == 0 || self.adapt_window == 0 || self.r_trace_stride == Some(0) {
            return Err(Error::Config("thinning, adaptation window and trace stride must be positive".into()));
        }
        for g in [self.initial_gamma1, self.initial_gamma2].into_iter().flatten() {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Config(format!("initial step size must be positive, got {g}")));
            }
        }
        Ok(())
    }

    /// Number of stored post-burn-in samples.
    pub fn n_samples(&self) -> usize {
        (self.n_max - self.n_burnin) / self.thinning
    }

    /// Short label such as `gibbs-pgdual-o`.
    pub fn label(&self) -> String {
        format!("{}-{}-{}", self.scheme, self.drift, covariance_label(self.covariance))
    }
}
