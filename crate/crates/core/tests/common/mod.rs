//! Fixtures and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use chrono::NaiveDate;
use proxmc::ingest::{lambda_defaults, parse_jhu_csv, to_daily, window};
use proxmc::{CountSeries, EpiModel, Hyperparams, SerialInterval};

pub fn data_file() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/jhu_confirmed_synthetic.csv")
}

pub fn uk_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2021, 12, 6).unwrap()
}

/// Five-week UK window of the synthetic fixture with default
/// hyperparameters.
pub fn uk_model() -> EpiModel {
    let cum = parse_jhu_csv(&data_file(), "United Kingdom").unwrap();
    let daily = to_daily(&cum).unwrap();
    let counts = window(&daily, uk_start(), 35, 26).unwrap();
    let hyper = lambda_defaults(&counts).unwrap();
    EpiModel::new(counts, SerialInterval::default(), hyper).unwrap()
}

/// Three days with a one-day serial interval: `Φ^Z = (4, 5, 6)`.
pub fn toy3(lambda_r: f64, lambda_o: f64) -> EpiModel {
    let counts = CountSeries::from_start(uk_start(), vec![5, 6, 4], vec![4]).unwrap();
    EpiModel::new(
        counts,
        SerialInterval::from_weights(vec![1.0]).unwrap(),
        Hyperparams::new(lambda_r, lambda_o).unwrap(),
    )
    .unwrap()
}

/// Eight days of small counts with one reporting dip.
pub fn toy8() -> EpiModel {
    let counts = CountSeries::from_start(uk_start(), vec![12, 14, 13, 4, 17, 16, 19, 18], vec![10, 11, 12]).unwrap();
    EpiModel::new(
        counts,
        SerialInterval::from_weights(vec![0.5, 0.3, 0.2]).unwrap(),
        Hyperparams::new(3.0, 0.5).unwrap(),
    )
    .unwrap()
}

/// `Σ_t (I_t − Z_t ln I_t) + λ_O |O_t|` for one day, `+∞` off the domain.
pub fn day_cost(z: f64, phi: f64, lambda_o: f64, r: f64, o: f64) -> f64 {
    let i = phi * r + o;
    let f = if z > 0.0 {
        if i <= 0.0 {
            return f64::INFINITY;
        }
        i - z * i.ln()
    } else if i < 0.0 {
        return f64::INFINITY;
    } else {
        i
    };
    f + lambda_o * o.abs()
}

pub fn grid(lo: f64, hi: f64, h: f64) -> Vec<f64> {
    let n = ((hi - lo) / h).round() as usize;
    (0..=n).map(|k| lo + k as f64 * h).collect()
}

/// Marginals of a three-day posterior on an `R` grid.
pub struct GridPosterior {
    pub r: Vec<f64>,
    /// `marginals[t][k]`: probability of `R_t` in the cell of `r[k]`.
    pub marginals: Vec<Vec<f64>>,
    pub mean_r: Vec<f64>,
    pub mean_o: Vec<f64>,
}

/// `ln ∫ exp(−f_t(r, o) − λ_O|o|) do` and the conditional mean of `o`, by
/// Simpson's rule on each side of the kink at `o = 0`.
fn o_integral(z: f64, phi: f64, lambda_o: f64, r: f64) -> (f64, f64) {
    let lo = -phi * r;
    let hi = z + 40.0 * z.sqrt().max(1.0) + 40.0 / lambda_o;
    let pieces = if lo < 0.0 { vec![(lo, 0.0), (0.0, hi)] } else { vec![(lo, hi)] };
    let mut nodes = Vec::new();
    for (a, b) in pieces {
        let m = 4000;
        let h = (b - a) / m as f64;
        for k in 0..=m {
            let w = if k == 0 || k == m { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            let o = a + k as f64 * h;
            nodes.push((o, w * h / 3.0, -day_cost(z, phi, lambda_o, r, o)));
        }
    }
    let top = nodes.iter().map(|n| n.2).fold(f64::NEG_INFINITY, f64::max);
    let (mut mass, mut first) = (0.0, 0.0);
    for (o, w, l) in nodes {
        let p = w * (l - top).exp();
        mass += p;
        first += p * o;
    }
    (top + mass.ln(), first / mass)
}

/// Grid posterior of a three-day model. Given `R` the density factorizes
/// over days in `O`, so only `R` needs a grid; each `O_t` is integrated out
/// numerically.
pub fn grid_posterior(model: &EpiModel, r_max: f64, n: usize) -> GridPosterior {
    assert_eq!(model.dim(), 3);
    let hyper = model.hyper();
    let h = r_max / n as f64;
    let r: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) * h).collect();
    let tables: Vec<Vec<(f64, f64)>> = (0..3)
        .map(|t| r.iter().map(|&x| o_integral(model.z()[t], model.phi_z()[t], hyper.lambda_o, x)).collect())
        .collect();
    let top: f64 = (0..3).map(|t| tables[t].iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max)).sum();
    let k = hyper.lambda_r / 6f64.sqrt();
    let mut marginals = vec![vec![0.0; n]; 3];
    let mut mean_o = [0.0; 3];
    let mut total = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let l = tables[0][a].0 + tables[1][b].0 + tables[2][c].0 - top
                    - k * (r[a] - 2.0 * r[b] + r[c]).abs();
                let p = l.exp();
                total += p;
                marginals[0][a] += p;
                marginals[1][b] += p;
                marginals[2][c] += p;
                mean_o[0] += p * tables[0][a].1;
                mean_o[1] += p * tables[1][b].1;
                mean_o[2] += p * tables[2][c].1;
            }
        }
    }
    for m in &mut marginals {
        m.iter_mut().for_each(|p| *p /= total);
    }
    let mean_r = marginals.iter().map(|m| m.iter().zip(&r).map(|(p, x)| p * x).sum()).collect();
    GridPosterior {
        r,
        marginals,
        mean_r,
        mean_o: mean_o.iter().map(|m| m / total).collect(),
    }
}

impl GridPosterior {
    /// Quantile of the `R_t` marginal, linear within grid cells.
    pub fn quantile_r(&self, t: usize, q: f64) -> f64 {
        let h = self.r[1] - self.r[0];
        let mut acc = 0.0;
        for (k, p) in self.marginals[t].iter().enumerate() {
            if acc + p >= q {
                return self.r[k] - 0.5 * h + h * (q - acc) / p;
            }
            acc += p;
        }
        *self.r.last().unwrap() + 0.5 * h
    }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Standard error of the mean of a correlated series by batch means.
pub fn batch_means_se(x: &[f64], batches: usize) -> f64 {
    let len = x.len() / batches;
    let means: Vec<f64> = (0..batches).map(|b| mean(&x[b * len..(b + 1) * len])).collect();
    let m = mean(&means);
    let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}
