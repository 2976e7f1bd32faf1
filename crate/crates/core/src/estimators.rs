//! Posterior summaries from pooled chains: quantiles, credibility bands for
//! `R` and `O`, and bands for the denoised counts `Z − O`.

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::model::CountSeries;
use crate::samplers::ChainTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    R,
    O,
}

/// Per-day lower, median and upper quantiles at level `1 − α`.
#[derive(Debug, Clone, PartialEq)]
pub struct CredibilityBand {
    pub dates: Vec<NaiveDate>,
    pub lower: Vec<f64>,
    pub median: Vec<f64>,
    pub upper: Vec<f64>,
    pub level: f64,
}

impl CredibilityBand {
    pub fn len(&self) -> usize {
        self.median.len()
    }

    pub fn is_empty(&self) -> bool {
        self.median.is_empty()
    }

    pub fn width(&self, t: usize) -> f64 {
        self.upper[t] - self.lower[t]
    }

    pub fn contains(&self, t: usize, x: f64) -> bool {
        self.lower[t] <= x && x <= self.upper[t]
    }
}

/// Quantile with linear interpolation between order statistics at the
/// zero-based position `q(n − 1)`.
pub fn empirical_quantile(samples: &[f64], q: f64) -> Result<f64> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, q)
}

pub fn quantile_sorted(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::Empty("quantile of an empty sample".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Config(format!("quantile level {q} outside [0, 1]")));
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

fn offset(target: Target, dim: usize) -> usize {
    match target {
        Target::R => 0,
        Target::O => dim,
    }
}

/// Pooled samples of day `t` of `target`, over every chain.
pub fn pooled(traces: &[ChainTrace], target: Target, t: usize) -> Vec<f64> {
    traces
        .iter()
        .flat_map(|tr| tr.component(offset(target, tr.dim) + t))
        .collect()
}

fn check_pool(traces: &[ChainTrace]) -> Result<usize> {
    let dim = traces
        .first()
        .map(|t| t.dim)
        .ok_or_else(|| Error::Empty("no chains".into()))?;
    if traces.iter().any(|t| t.dim != dim) {
        return Err(Error::Config("chains have different dimensions".into()));
    }
    if traces.iter().all(|t| t.n_samples() == 0) {
        return Err(Error::Empty("no post-burn-in samples".into()));
    }
    Ok(dim)
}

/// Quantiles `α/2`, `0.5`, `1 − α/2` of the pooled samples, per day.
pub fn credibility_band(traces: &[ChainTrace], target: Target, alpha: f64, dates: &[NaiveDate]) -> Result<CredibilityBand> {
    let dim = check_pool(traces)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if dates.len() != dim {
        return Err(Error::Config(format!("{} dates for {dim} days", dates.len())));
    }
    let mut band = CredibilityBand {
        dates: dates.to_vec(),
        lower: Vec::with_capacity(dim),
        median: Vec::with_capacity(dim),
        upper: Vec::with_capacity(dim),
        level: 1.0 - alpha,
    };
    for t in 0..dim {
        let mut s = pooled(traces, target, t);
        s.sort_by(f64::total_cmp);
        band.lower.push(quantile_sorted(&s, alpha / 2.0)?);
        band.median.push(quantile_sorted(&s, 0.5)?);
        band.upper.push(quantile_sorted(&s, 1.0 - alpha / 2.0)?);
    }
    Ok(band)
}

/// Band of `Z − O`: the bounds of the `O` band swap under negation.
pub fn denoised_band(counts: &CountSeries, o_band: &CredibilityBand) -> Result<CredibilityBand> {
    if counts.dates() != o_band.dates.as_slice() {
        return Err(Error::Config("count and band dates differ".into()));
    }
    let z: Vec<f64> = counts.values().iter().map(|&v| v as f64).collect();
    let shift = |xs: &[f64]| -> Vec<f64> { z.iter().zip(xs).map(|(z, x)| z - x).collect() };
    Ok(CredibilityBand {
        dates: o_band.dates.clone(),
        lower: shift(&o_band.upper),
        median: shift(&o_band.median),
        upper: shift(&o_band.lower),
        level: o_band.level,
    })
}

pub fn posterior_mean(traces: &[ChainTrace], target: Target) -> Result<Vec<f64>> {
    let dim = check_pool(traces)?;
    Ok((0..dim)
        .map(|t| {
            let s = pooled(traces, target, t);
            s.iter().sum::<f64>() / s.len() as f64
        })
        .collect())
}

pub fn posterior_median(traces: &[ChainTrace], target: Target) -> Result<Vec<f64>> {
    let dim = check_pool(traces)?;
    (0..dim)
        .map(|t| empirical_quantile(&pooled(traces, target, t), 0.5))
        .collect()
}
