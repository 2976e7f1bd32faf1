//! MAP estimation by the Chambolle-Pock primal-dual algorithm, and the
//! kernel criterion for uniqueness of the minimizer.
//!
//! The problem `min f(R, O) + λ_R‖DR‖₁ + λ_O‖O‖₁ + ι{R ≥ 0}` is split as
//! `F(Kθ) + G(θ)` with `Kθ = (Φ^Z ∘ R + O, DR)`,
//! `F(u, v) = Σ_t d_KL(Z_t | u_t) + λ_R‖v‖₁` and
//! `G(R, O) = ι{R ≥ 0} + λ_O‖O‖₁`.
//!
//! The iteration runs on counts divided by `s = mean(Z)`. Since
//! `d_KL(sz | sp) = s·d_KL(z | p)`, the rescaled problem in `(R, O/s)` with
//! `λ_R/s` in place of `λ_R` has the same minimizer.

use log::warn;

use crate::error::{Error, Result};
use crate::linalg::{power_iteration, smallest_singular_value, DenseMatrix};
use crate::linops::SecondDiffOp;
use crate::model::{neg_log_posterior, EpiModel, Theta};
use crate::prox::{prox_poisson_kl, soft_threshold_scalar};

pub const DEFAULT_MAX_ITERS: usize = 500_000;
pub const DEFAULT_TOL: f64 = 1e-12;
/// Iterations between two objective values compared by the stopping rule.
pub const CHECK_SPAN: usize = 100;
const STEP_FACTOR: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub struct MapEstimate {
    pub theta: Theta,
    /// `f + g` at `theta`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each iteration, `+∞` while the iterate is infeasible.
    pub trace: Vec<f64>,
}

/// Problem data after division of the counts by `s`.
struct Scaled {
    z: Vec<f64>,
    phi: Vec<f64>,
    lambda_r: f64,
    lambda_o: f64,
    scale: f64,
}

impl Scaled {
    fn new(model: &EpiModel) -> Self {
        let z = model.z();
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        let scale = if mean > 0.0 { mean } else { 1.0 };
        let hyper = model.hyper();
        Scaled {
            z: z.iter().map(|v| v / scale).collect(),
            phi: model.phi_z().iter().map(|v| v / scale).collect(),
            lambda_r: hyper.lambda_r / scale,
            lambda_o: hyper.lambda_o,
            scale,
        }
    }

    fn apply_k(&self, diff: &SecondDiffOp, r: &[f64], o: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let u = (0..r.len()).map(|t| self.phi[t] * r[t] + o[t]).collect();
        (u, diff.apply(r))
    }

    fn apply_kt(&self, diff: &SecondDiffOp, u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let dv = diff.apply_transpose(v);
        let r = (0..u.len()).map(|t| self.phi[t] * u[t] + dv[t]).collect();
        (r, u.to_vec())
    }
}

/// Warns when the data do not guarantee that a minimizer exists: this needs
/// two days with positive `Φ^Z` and one positive count.
fn check_existence(model: &EpiModel) {
    let positive_phi = model.phi_z().iter().filter(|&&p| p > 0.0).count();
    let positive_z = model.z().iter().any(|&z| z > 0.0);
    if positive_phi < 2 || !positive_z {
        warn!("existence of a MAP estimate is not guaranteed: {positive_phi} days with positive weighted past counts, positive count present: {positive_z}");
    }
}

/// On a zero-count day the optimal intensity is zero, which the iterates
/// approach from either side; lift slightly negative intensities to zero.
fn snap_to_domain(model: &EpiModel, theta: &mut Theta) {
    let phi = model.phi_z();
    for (t, &z) in model.z().iter().enumerate() {
        let i = phi[t] * theta.r[t] + theta.o[t];
        if z == 0.0 && i < 0.0 {
            theta.o[t] = -phi[t] * theta.r[t];
        }
    }
}

fn unscaled(s: &Scaled, r: &[f64], o: &[f64]) -> Theta {
    Theta::new(r.to_vec(), o.iter().map(|v| v * s.scale).collect())
}

/// Minimizes `f + g` from `(R, O) = (1, 0)` with zero duals and
/// `σ = τ = 0.99/‖K‖`. Stops once the objective changes by less than
/// `tol·max(|F|, 1)` over [`CHECK_SPAN`] iterations.
pub fn solve_map(model: &EpiModel, diff: &SecondDiffOp, max_iters: usize, tol: f64) -> Result<MapEstimate> {
    let n = model.dim();
    if diff.dim() != n {
        return Err(Error::Config(format!("difference operator of size {} for {n} days", diff.dim())));
    }
    check_existence(model);
    let s = Scaled::new(model);
    let norm_k = power_iteration(
        2 * n,
        |x| {
            let (u, v) = s.apply_k(diff, &x[..n], &x[n..]);
            let (a, b) = s.apply_kt(diff, &u, &v);
            a.into_iter().chain(b).collect()
        },
        1000,
    )
    .sqrt();
    if !(norm_k.is_finite() && norm_k > 0.0) {
        return Err(Error::Degenerate(format!("operator norm {norm_k}")));
    }
    let step = STEP_FACTOR / norm_k;

    let mut r = vec![1.0; n];
    let mut o = vec![0.0; n];
    let mut r_bar = r.clone();
    let mut o_bar = o.clone();
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; diff.nrows()];
    let mut trace = Vec::new();
    let mut converged = false;

    for k in 1..=max_iters {
        let (ku, kv) = s.apply_k(diff, &r_bar, &o_bar);
        for t in 0..n {
            // Moreau: prox_{σF*}(y) = y − σ prox_{F/σ}(y/σ).
            let y = u[t] + step * ku[t];
            u[t] = y - step * prox_poisson_kl(y / step, s.z[t], 1.0 / step);
        }
        for (vi, kvi) in v.iter_mut().zip(&kv) {
            *vi = (*vi + step * kvi).clamp(-s.lambda_r, s.lambda_r);
        }
        let (gr, go) = s.apply_kt(diff, &u, &v);
        for t in 0..n {
            let r_new = (r[t] - step * gr[t]).max(0.0);
            let o_new = soft_threshold_scalar(o[t] - step * go[t], step * s.lambda_o);
            r_bar[t] = 2.0 * r_new - r[t];
            o_bar[t] = 2.0 * o_new - o[t];
            r[t] = r_new;
            o[t] = o_new;
        }
        if r.iter().chain(&o).any(|x| !x.is_finite()) {
            return Err(Error::Divergence(format!("non-finite iterate at iteration {k}")));
        }
        let mut theta = unscaled(&s, &r, &o);
        snap_to_domain(model, &mut theta);
        let obj = neg_log_posterior(&theta, model, diff);
        if obj.is_nan() {
            return Err(Error::Divergence(format!("objective is NaN at iteration {k}")));
        }
        trace.push(obj);
        if k % CHECK_SPAN == 0 && k > CHECK_SPAN {
            let prev = trace[k - 1 - CHECK_SPAN];
            if obj.is_finite() && prev.is_finite() && (obj - prev).abs() <= tol * obj.abs().max(1.0) {
                converged = true;
                break;
            }
        }
    }

    let mut theta = unscaled(&s, &r, &o);
    snap_to_domain(model, &mut theta);
    let objective = neg_log_posterior(&theta, model, diff);
    if !objective.is_finite() {
        return Err(Error::Divergence(format!(
            "no feasible iterate after {} iterations",
            trace.len()
        )));
    }
    if !converged {
        warn!("MAP solver stopped at the iteration limit {max_iters}");
    }
    Ok(MapEstimate {
        theta,
        objective,
        iterations: trace.len(),
        converged,
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Uniqueness {
    Unique,
    PossiblyNonunique,
}

impl Uniqueness {
    pub fn as_str(&self) -> &'static str {
        match self {
            Uniqueness::Unique => "unique",
            Uniqueness::PossiblyNonunique => "possibly-nonunique",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    pub verdict: Uniqueness,
    /// Recovered subgradient coordinates, one per row of `U`.
    pub subgradient: Vec<f64>,
    /// Rows of `U` whose subgradient coordinate lies strictly inside (−1, 1).
    pub interior_rows: Vec<usize>,
    /// `‖∇f + Uᵀγ + ν‖` over the coordinates not pinned by `R_t = 0`, with
    /// `ν` the normal-cone term of zero-count days at zero intensity.
    pub residual: f64,
    /// Smallest singular value of `[U_𝓘; diag(Φ^Z) I]`.
    pub smallest_singular_value: f64,
}

/// Dense `U = [λ_R D, 0; 0, λ_O I]`.
pub fn penalty_matrix(diff: &SecondDiffOp, lambda_r: f64, lambda_o: f64) -> DenseMatrix {
    let n = diff.dim();
    let m = diff.nrows();
    let mut u = DenseMatrix::zeros(m + n, 2 * n);
    for k in 0..m {
        for (j, x) in diff.dense_row(k).into_iter().enumerate() {
            u[(k, j)] = lambda_r * x;
        }
    }
    for t in 0..n {
        u[(m + t, n + t)] = lambda_o;
    }
    u
}

/// Kernel criterion at a minimizer: recovers a subgradient `γ` with
/// `∇f + Uᵀγ = 0` by least squares (signs fixed where `Uθ ≠ 0`), takes the
/// rows with `|γᵢ| < 1 − tol` and tests whether `ker U_𝓘 ∩ ker[diag(Φ^Z) I]`
/// is trivial. Ambiguous recoveries report `PossiblyNonunique`.
pub fn map_uniqueness_check(theta: &Theta, model: &EpiModel, diff: &SecondDiffOp, tol: f64) -> Result<UniquenessReport> {
    let n = model.dim();
    let hyper = model.hyper();
    let u = penalty_matrix(diff, hyper.lambda_r, hyper.lambda_o);
    let (gr, go) = model.grad_f(theta)?;
    let grad: Vec<f64> = gr.into_iter().chain(go).collect();
    let x: Vec<f64> = theta.r.iter().chain(&theta.o).copied().collect();
    let ux = u.mul_vec(&x);
    let rows = u.nrows();

    // Zero test relative to the size of the entries of Uθ.
    let scale = ux.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-300);
    let zero_eps = 1e-9 * scale.max(x.iter().fold(0.0f64, |a, b| a.max(b.abs())));
    let mut gamma = vec![0.0; rows];
    let mut free = Vec::new();
    for i in 0..rows {
        if ux[i].abs() > zero_eps {
            gamma[i] = ux[i].signum();
        } else {
            free.push(i);
        }
    }
    // Equations for R_t pinned at zero carry a free multiplier: drop them.
    let eqs: Vec<usize> = (0..2 * n).filter(|&j| !(j < n && theta.r[j] <= 0.0)).collect();
    // Zero-count days at zero intensity sit on the boundary of the domain;
    // the normal cone adds a multiple of (Φ^Z_t e_t, e_t).
    let intensity = model.intensity(theta);
    let i_scale = intensity.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-300);
    let boundary: Vec<usize> = (0..n)
        .filter(|&t| model.z()[t] == 0.0 && intensity[t].abs() <= 1e-9 * i_scale)
        .collect();
    let ut = u.transpose();
    let column = |j: usize, q: usize| -> f64 {
        if q < free.len() {
            ut[(j, free[q])]
        } else {
            let t = boundary[q - free.len()];
            if j == t {
                model.phi_z()[t]
            } else if j == n + t {
                1.0
            } else {
                0.0
            }
        }
    };
    let unknowns = free.len() + boundary.len();
    let rhs: Vec<f64> = eqs
        .iter()
        .map(|&j| -grad[j] - (0..rows).filter(|i| !free.contains(i)).map(|i| ut[(j, i)] * gamma[i]).sum::<f64>())
        .collect();

    let mut ambiguous = false;
    let mut multipliers = vec![0.0; boundary.len()];
    if unknowns > 0 {
        let a = nalgebra::DMatrix::from_fn(eqs.len(), unknowns, |p, q| column(eqs[p], q));
        let svd = a.svd(true, true);
        let smax = svd.singular_values.max();
        let rank = svd.rank(1e-10 * smax.max(1e-300));
        if rank < unknowns {
            ambiguous = true;
        }
        let b = nalgebra::DVector::from_vec(rhs.clone());
        let sol = svd
            .solve(&b, 1e-10 * smax.max(1e-300))
            .map_err(|e| Error::Degenerate(format!("subgradient recovery: {e}")))?;
        for (q, &i) in free.iter().enumerate() {
            gamma[i] = sol[q].clamp(-1.0, 1.0);
        }
        for (q, m) in multipliers.iter_mut().enumerate() {
            *m = sol[free.len() + q];
        }
    }
    let mut ug = u.tr_mul_vec(&gamma);
    for (&t, m) in boundary.iter().zip(&multipliers) {
        ug[t] += m * model.phi_z()[t];
        ug[n + t] += m;
    }
    let residual = eqs
        .iter()
        .map(|&j| (grad[j] + ug[j]).powi(2))
        .sum::<f64>()
        .sqrt();

    let interior_rows: Vec<usize> = (0..rows).filter(|&i| gamma[i].abs() < 1.0 - tol).collect();
    let mut stacked = Vec::with_capacity(interior_rows.len() + n);
    for &i in &interior_rows {
        stacked.push(u.row(i).to_vec());
    }
    for t in 0..n {
        let mut row = vec![0.0; 2 * n];
        row[t] = model.phi_z()[t];
        row[n + t] = 1.0;
        stacked.push(row);
    }
    let m = DenseMatrix::from_rows(&stacked);
    let sigma = smallest_singular_value(&m);
    let row_scale = (0..m.nrows())
        .map(|i| m.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let trivial = sigma > 1e-8 * row_scale;
    let verdict = if trivial && !ambiguous {
        Uniqueness::Unique
    } else {
        Uniqueness::PossiblyNonunique
    };
    Ok(UniquenessReport {
        verdict,
        subgradient: gamma,
        interior_rows,
        residual,
        smallest_singular_value: sigma,
    })
}
