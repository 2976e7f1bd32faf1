//! Poisson renewal model with additive outliers.
//!
//! Daily counts `Z_t` are Poisson with intensity
//! `I_t = R_t Φ^Z_t + O_t`, where `Φ^Z_t = Σ_{u=1..τ} Φ_u Z_{t−u}` is the
//! serial-interval-weighted sum of past counts. The negative log-posterior is
//! `f(θ) + λ_R ‖D R‖₁ + λ_O ‖O‖₁` on the domain
//!
//! ```text
//! 𝒟 = { R ≥ 0, I_t > 0 where Z_t > 0, I_t ≥ 0 where Z_t = 0 }
//! ```
//!
//! and `+∞` elsewhere. `f` drops the `ln Z_t!` constants of the Poisson
//! likelihood.

use chrono::NaiveDate;
use statrs::distribution::{ContinuousCDF, Gamma};

use crate::error::{Error, Result};
use crate::linops::SecondDiffOp;

/// Observed daily counts on consecutive dates, plus the `τ` counts that
/// precede the first date.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountSeries {
    dates: Vec<NaiveDate>,
    values: Vec<u64>,
    history: Vec<u64>,
}

impl CountSeries {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<u64>, history: Vec<u64>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::Config(format!(
                "{} dates for {} counts",
                dates.len(),
                values.len()
            )));
        }
        if values.is_empty() {
            return Err(Error::Config("empty count series".into()));
        }
        for w in dates.windows(2) {
            if w[0].succ_opt() != Some(w[1]) {
                return Err(Error::Config(format!(
                    "dates are not consecutive: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self {
            dates,
            values,
            history,
        })
    }

    /// Series whose dates start at `start` and run consecutively.
    pub fn from_start(start: NaiveDate, values: Vec<u64>, history: Vec<u64>) -> Result<Self> {
        let dates = start.iter_days().take(values.len()).collect();
        Self::new(dates, values, history)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn history(&self) -> &[u64] {
        &self.history
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Discretized serial interval `Φ_1..Φ_τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SerialInterval {
    weights: Vec<f64>,
}

impl SerialInterval {
    /// Nonnegative weights summing to one.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Config("serial interval must have at least one weight".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config("serial interval weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("serial interval weights sum to {total}, not 1")));
        }
        Ok(Self { weights })
    }

    /// Gamma law with the given mean and standard deviation, integrated over
    /// the unit intervals `(u−1, u]` for `u = 1..=tau` and renormalized.
    pub fn gamma(mean: f64, sd: f64, tau: usize) -> Result<Self> {
        if !(mean > 0.0 && sd > 0.0) || tau == 0 {
            return Err(Error::Config(format!(
                "serial interval needs mean > 0, sd > 0, tau >= 1 (got {mean}, {sd}, {tau})"
            )));
        }
        let (shape, scale) = gamma_shape_scale(mean, sd);
        let law = Gamma::new(shape, 1.0 / scale).map_err(|e| Error::Config(e.to_string()))?;
        let mut weights: Vec<f64> = (1..=tau)
            .map(|u| law.cdf(u as f64) - law.cdf(u as f64 - 1.0))
            .collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Config("serial interval has no mass on the truncation window".into()));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tau(&self) -> usize {
        self.weights.len()
    }
}

impl Default for SerialInterval {
    /// Mean 6.6 days, standard deviation 3.5 days, truncated at 26 days.
    fn default() -> Self {
        Self::gamma(6.6, 3.5, 26).expect("default serial interval parameters are valid")
    }
}

/// `(shape, scale)` of the Gamma law with the given mean and standard deviation.
pub fn gamma_shape_scale(mean: f64, sd: f64) -> (f64, f64) {
    ((mean / sd).powi(2), sd * sd / mean)
}

/// Regularization weights of the prior.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Hyperparams {
    pub lambda_r: f64,
    pub lambda_o: f64,
}

impl Hyperparams {
    pub fn new(lambda_r: f64, lambda_o: f64) -> Result<Self> {
        if !(lambda_r > 0.0 && lambda_r.is_finite() && lambda_o > 0.0 && lambda_o.is_finite()) {
            return Err(Error::Config(format!(
                "hyperparameters must be positive and finite (lambda_R = {lambda_r}, lambda_O = {lambda_o})"
            )));
        }
        Ok(Self { lambda_r, lambda_o })
    }
}

/// Reproduction numbers and outliers.
#[derive(Debug, Clone, PartialEq)]
pub struct Theta {
    pub r: Vec<f64>,
    pub o: Vec<f64>,
}

impl Theta {
    pub fn new(r: Vec<f64>, o: Vec<f64>) -> Self {
        assert_eq!(r.len(), o.len(), "R and O must have the same length");
        Self { r, o }
    }

    /// `R ≡ 1`, `O ≡ 0`.
    pub fn neutral(dim: usize) -> Self {
        Self::new(vec![1.0; dim], vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.r.len()
    }
}

/// `Φ^Z_t = Σ_{u=1..τ} Φ_u Z_{t−u}`, reading `Z_s` for `s ≤ 0` from the history.
pub fn weighted_past_counts(counts: &CountSeries, phi: &SerialInterval) -> Result<Vec<f64>> {
    let tau = phi.tau();
    if counts.history().len() != tau {
        return Err(Error::Config(format!(
            "history holds {} days but the serial interval spans {tau}",
            counts.history().len()
        )));
    }
    // full[k] = Z_{k+1−τ}; day t (one-based) sits at index t−1+τ.
    let full: Vec<f64> = counts
        .history()
        .iter()
        .chain(counts.values())
        .map(|&z| z as f64)
        .collect();
    let w = phi.weights();
    Ok((0..counts.len())
        .map(|t| {
            let here = t + tau;
            (1..=tau).map(|u| w[u - 1] * full[here - u]).sum()
        })
        .collect())
}

/// Frozen problem instance: data, serial interval, hyperparameters and the
/// precomputed `Φ^Z`.
#[derive(Debug, Clone)]
pub struct EpiModel {
    counts: CountSeries,
    phi: SerialInterval,
    hyper: Hyperparams,
    phi_z: Vec<f64>,
    z: Vec<f64>,
}

impl EpiModel {
    pub fn new(counts: CountSeries, phi: SerialInterval, hyper: Hyperparams) -> Result<Self> {
        let phi_z = weighted_past_counts(&counts, &phi)?;
        let z = counts.values().iter().map(|&v| v as f64).collect();
        Ok(Self {
            counts,
            phi,
            hyper,
            phi_z,
            z,
        })
    }

    pub fn counts(&self) -> &CountSeries {
        &self.counts
    }

    pub fn serial_interval(&self) -> &SerialInterval {
        &self.phi
    }

    pub fn hyper(&self) -> Hyperparams {
        self.hyper
    }

    pub fn phi_z(&self) -> &[f64] {
        &self.phi_z
    }

    /// Counts as reals.
    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    #[inline]
    fn intensity_at(&self, t: usize, r: f64, o: f64) -> f64 {
        r * self.phi_z[t] + o
    }

    pub fn intensity(&self, theta: &Theta) -> Vec<f64> {
        (0..self.dim())
            .map(|t| self.intensity_at(t, theta.r[t], theta.o[t]))
            .collect()
    }

    pub fn in_domain(&self, theta: &Theta) -> bool {
        (0..self.dim()).all(|t| {
            let r = theta.r[t];
            let i = self.intensity_at(t, r, theta.o[t]);
            r >= 0.0 && if self.z[t] > 0.0 { i > 0.0 } else { i >= 0.0 }
        })
    }

    /// `Σ_t (−Z_t ln I_t + I_t)` with `0·ln 0 = 0`; `+∞` off the domain.
    pub fn f_data(&self, theta: &Theta) -> f64 {
        let mut total = 0.0;
        for t in 0..self.dim() {
            let r = theta.r[t];
            let i = self.intensity_at(t, r, theta.o[t]);
            let z = self.z[t];
            if r < 0.0 || i < 0.0 || (z > 0.0 && i <= 0.0) || i.is_nan() {
                return f64::INFINITY;
            }
            total += if z > 0.0 { i - z * i.ln() } else { i };
        }
        total
    }

    /// `(∇_R f, ∇_O f)`: `∂f/∂O_t = 1 − Z_t/I_t` (the ratio is `0` when
    /// `Z_t = 0`) and `∂f/∂R_t = Φ^Z_t ∂f/∂O_t`.
    pub fn grad_f(&self, theta: &Theta) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.dim();
        let mut gr = Vec::with_capacity(n);
        let mut go = Vec::with_capacity(n);
        for t in 0..n {
            let z = self.z[t];
            let g = if z > 0.0 {
                let i = self.intensity_at(t, theta.r[t], theta.o[t]);
                if i <= 0.0 || !i.is_finite() {
                    return Err(Error::Domain(format!(
                        "gradient undefined at day {t}: intensity {i} with count {z}"
                    )));
                }
                1.0 - z / i
            } else {
                1.0
            };
            go.push(g);
            gr.push(self.phi_z[t] * g);
        }
        Ok((gr, go))
    }
}

/// `λ_R ‖D R‖₁ + λ_O ‖O‖₁`.
pub fn g_prior(theta: &Theta, diff: &SecondDiffOp, hyper: &Hyperparams) -> f64 {
    hyper.lambda_r * diff.l1_norm_of_apply(&theta.r)
        + hyper.lambda_o * theta.o.iter().map(|x| x.abs()).sum::<f64>()
}

/// `f + g`, up to the normalizing constant; `+∞` off the domain.
pub fn neg_log_posterior(theta: &Theta, model: &EpiModel, diff: &SecondDiffOp) -> f64 {
    let f = model.f_data(theta);
    if !f.is_finite() {
        return f64::INFINITY;
    }
    f + g_prior(theta, diff, &model.hyper())
}
