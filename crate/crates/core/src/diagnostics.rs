//! Convergence diagnostics: normalized distance to the MAP, mean absolute
//! autocorrelation over components, and the Gelman-Rubin statistic.

use log::warn;

use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::samplers::ChainTrace;

/// `‖Rⁿ − R̂‖ / ‖R̂‖` for each row of `trace_r` (rows of length `T`).
pub fn distance_to_map(trace_r: &[f64], r_map: &[f64]) -> Result<Vec<f64>> {
    let dim = r_map.len();
    let scale = norm2(r_map);
    if scale == 0.0 || dim == 0 {
        return Err(Error::Degenerate("MAP estimate of R has zero norm".into()));
    }
    if trace_r.len() % dim != 0 {
        return Err(Error::Config(format!(
            "trace of length {} is not a whole number of rows of length {dim}",
            trace_r.len()
        )));
    }
    Ok(trace_r
        .chunks_exact(dim)
        .map(|row| {
            row.iter()
                .zip(r_map)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
                / scale
        })
        .collect())
}

/// Biased autocorrelation `ρ̂(ℓ)` for `ℓ = 0..=max_lag`; `None` for a
/// constant series.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Option<Vec<f64>> {
    let lags: Vec<usize> = (0..=max_lag).collect();
    autocorrelation_at(x, &lags)
}

/// `ρ̂(ℓ)` at the given lags, each below `x.len()`.
pub fn autocorrelation_at(x: &[f64], lags: &[usize]) -> Option<Vec<f64>> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let denom: f64 = centered.iter().map(|v| v * v).sum();
    if denom == 0.0 {
        return None;
    }
    Some(
        lags.iter()
            .map(|&l| centered[..n - l].iter().zip(&centered[l..]).map(|(a, b)| a * b).sum::<f64>() / denom)
            .collect(),
    )
}

/// Mean over the `2T` components of `|ρ̂_c(ℓ)|`, `ℓ = 0..=max_lag`. Constant
/// components are skipped.
pub fn mean_abs_acf(trace: &ChainTrace, max_lag: usize) -> Result<Vec<f64>> {
    let lags: Vec<usize> = (0..=max_lag).collect();
    mean_abs_acf_at(trace, &lags)
}

/// As [`mean_abs_acf`] at selected lags only.
pub fn mean_abs_acf_at(trace: &ChainTrace, lags: &[usize]) -> Result<Vec<f64>> {
    let columns: Vec<Vec<f64>> = (0..2 * trace.dim).map(|c| trace.component(c)).collect();
    mean_abs_acf_columns_at(&columns, lags)
}

/// As [`mean_abs_acf`] on explicit component series of equal length.
pub fn mean_abs_acf_columns(columns: &[Vec<f64>], max_lag: usize) -> Result<Vec<f64>> {
    let lags: Vec<usize> = (0..=max_lag).collect();
    mean_abs_acf_columns_at(columns, &lags)
}

pub fn mean_abs_acf_columns_at(columns: &[Vec<f64>], lags: &[usize]) -> Result<Vec<f64>> {
    let top = lags.iter().copied().max().unwrap_or(0);
    let mut acc = vec![0.0; lags.len()];
    let mut used = 0usize;
    for (c, col) in columns.iter().enumerate() {
        if col.len() <= top {
            return Err(Error::Config(format!("{} samples cannot give lags up to {top}", col.len())));
        }
        match autocorrelation_at(col, lags) {
            Some(rho) => {
                acc.iter_mut().zip(rho).for_each(|(a, r)| *a += r.abs());
                used += 1;
            }
            None => warn!("component {c} is constant; skipped in the autocorrelation"),
        }
    }
    if used == 0 {
        return Err(Error::Degenerate("every component is constant".into()));
    }
    Ok(acc.into_iter().map(|a| a / used as f64).collect())
}

/// Gelman-Rubin statistic at one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct GelmanRubin {
    /// Samples per chain used.
    pub n: usize,
    pub max: f64,
    pub per_component: Vec<f64>,
}

/// `√(((n−1)/n·W + B/n)/W)` of one component across chains of equal length.
pub fn potential_scale_reduction(chains: &[&[f64]]) -> Result<f64> {
    let m = chains.len();
    if m < 2 {
        return Err(Error::Config("Gelman-Rubin needs at least two chains".into()));
    }
    let n = chains[0].len();
    if n < 2 || chains.iter().any(|c| c.len() != n) {
        return Err(Error::Config("Gelman-Rubin needs chains of equal length >= 2".into()));
    }
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
    let grand = means.iter().sum::<f64>() / m as f64;
    let b = n as f64 / (m - 1) as f64 * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1) as f64)
        .sum::<f64>()
        / m as f64;
    if w == 0.0 {
        return Err(Error::Degenerate("zero within-chain variance".into()));
    }
    let nf = n as f64;
    Ok((((nf - 1.0) / nf * w + b / nf) / w).sqrt())
}

/// Statistic over the first `n` samples of each chain for every `n` in
/// `checkpoints`, on all `2T` components.
pub fn gelman_rubin(traces: &[ChainTrace], checkpoints: &[usize]) -> Result<Vec<GelmanRubin>> {
    if traces.len() < 2 {
        return Err(Error::Config("Gelman-Rubin needs at least two chains".into()));
    }
    let n = traces[0].n_samples();
    if traces.iter().any(|t| t.n_samples() != n || t.dim != traces[0].dim) {
        return Err(Error::Config("chains have different lengths".into()));
    }
    let components: Vec<Vec<Vec<f64>>> = (0..2 * traces[0].dim)
        .map(|c| traces.iter().map(|t| t.component(c)).collect())
        .collect();
    gelman_rubin_columns(&components, checkpoints)
}

/// `components[c][j]` is the series of component `c` in chain `j`. A
/// component that is constant within every chain gets `NaN` and is left out
/// of the max.
pub fn gelman_rubin_columns(components: &[Vec<Vec<f64>>], checkpoints: &[usize]) -> Result<Vec<GelmanRubin>> {
    checkpoints
        .iter()
        .map(|&n| {
            let per_component = components
                .iter()
                .map(|chains| {
                    let heads: Vec<&[f64]> = chains
                        .iter()
                        .map(|c| c.get(..n).ok_or_else(|| Error::Config(format!("checkpoint {n} beyond chain length"))))
                        .collect::<Result<_>>()?;
                    match potential_scale_reduction(&heads) {
                        Err(Error::Degenerate(_)) => Ok(f64::NAN),
                        other => other,
                    }
                })
                .collect::<Result<Vec<f64>>>()?;
            let max = per_component.iter().cloned().filter(|v| !v.is_nan()).fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return Err(Error::Degenerate(format!("every component is constant within chains at n = {n}")));
            }
            Ok(GelmanRubin { n, max, per_component })
        })
        .collect()
}

/// First checkpoint at which the statistic falls below `threshold`.
pub fn first_below(stats: &[GelmanRubin], threshold: f64) -> Option<usize> {
    stats.iter().find(|g| g.max < threshold).map(|g| g.n)
}
