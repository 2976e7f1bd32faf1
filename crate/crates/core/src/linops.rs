//! The second-order difference operator `D`, its stride-3 decimations, and
//! invertible `T × T` augmentations `D̄ = [U; D]`.
//!
//! `D` has rows `(1, −2, 1)/√6` at offsets `(k, k+1, k+2)` and therefore unit
//! row norms. Two augmentations are provided:
//!
//! * [`Augmentation::Invert`]: `U` is `e₁` and `(−2, 1, 0, …)/√5`, which makes
//!   `D̄` lower triangular with bandwidth 3;
//! * [`Augmentation::Ortho`]: the same two rows orthogonalized against the
//!   row space of `D` and against each other, then normalized.
//!
//! [`AugmentedDiffOp::orthonormal_completion`] builds `[U; A]` for a
//! decimated block `A` with `U` an orthonormal basis of the orthogonal
//! complement of the rows of `A`.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, DenseMatrix};

const INV_SQRT6: f64 = 0.408_248_290_463_863_016_366_214_012_450_98;
const INV_SQRT5: f64 = 0.447_213_595_499_957_939_281_834_733_746_26;

/// `(T−2) × T` normalized second-order difference operator, stored implicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SecondDiffOp {
    dim: usize,
}

impl SecondDiffOp {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 3 {
            return Err(Error::Config(format!(
                "second-difference operator needs T >= 3, got {dim}"
            )));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nrows(&self) -> usize {
        self.dim - 2
    }

    #[inline]
    pub fn row_value(&self, k: usize, x: &[f64]) -> f64 {
        (x[k] - 2.0 * x[k + 1] + x[k + 2]) * INV_SQRT6
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        (0..self.nrows()).map(|k| self.row_value(k, x)).collect()
    }

    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows());
        let mut x = vec![0.0; self.dim];
        for (k, &v) in y.iter().enumerate() {
            let s = v * INV_SQRT6;
            x[k] += s;
            x[k + 1] -= 2.0 * s;
            x[k + 2] += s;
        }
        x
    }

    /// `‖D x‖₁` without allocating.
    pub fn l1_norm_of_apply(&self, x: &[f64]) -> f64 {
        (0..self.nrows()).map(|k| self.row_value(k, x).abs()).sum()
    }

    /// Dense row `k` (zero-based).
    pub fn dense_row(&self, k: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.dim];
        row[k] = INV_SQRT6;
        row[k + 1] = -2.0 * INV_SQRT6;
        row[k + 2] = INV_SQRT6;
        row
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let rows: Vec<_> = (0..self.nrows()).map(|k| self.dense_row(k)).collect();
        DenseMatrix::from_rows(&rows)
    }
}

/// Rows `i, i+3, i+6, …` (one-based `i ∈ {1,2,3}`) of `D`. Rows at stride 3
/// have disjoint supports, so `A Aᵀ = I`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecimatedDiffOp {
    block: usize,
    diff: SecondDiffOp,
    rows: Vec<usize>,
}

impl DecimatedDiffOp {
    pub fn new(block: usize, dim: usize) -> Result<Self> {
        if !(1..=3).contains(&block) {
            return Err(Error::Config(format!("decimation block must be 1, 2 or 3, got {block}")));
        }
        let diff = SecondDiffOp::new(dim)?;
        let rows = (block - 1..diff.nrows()).step_by(3).collect();
        Ok(Self { block, diff, rows })
    }

    /// The three blocks partitioning the rows of `D`.
    pub fn all(dim: usize) -> Result<[Self; 3]> {
        Ok([Self::new(1, dim)?, Self::new(2, dim)?, Self::new(3, dim)?])
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn dim(&self) -> usize {
        self.diff.dim()
    }

    /// Zero-based indices of the rows of `D` held by this block.
    pub fn row_indices(&self) -> &[usize] {
        &self.rows
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|&k| self.diff.row_value(k, x)).collect()
    }

    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows.len());
        let mut x = vec![0.0; self.dim()];
        for (&k, &v) in self.rows.iter().zip(y) {
            let s = v * INV_SQRT6;
            x[k] += s;
            x[k + 1] -= 2.0 * s;
            x[k + 2] += s;
        }
        x
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let rows: Vec<_> = self.rows.iter().map(|&k| self.diff.dense_row(k)).collect();
        DenseMatrix::from_rows(&rows)
    }

    /// Orthogonal projection `Aᵀ(AAᵀ)⁻¹A = AᵀA` onto the row space.
    pub fn projection(&self) -> DenseMatrix {
        let a = self.to_dense();
        a.transpose().matmul(&a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Augmentation {
    /// `U = [e₁; (−2, 1, 0, …)/√5]`, lower triangular.
    Invert,
    /// `U` orthonormal and orthogonal to the rows of `D`.
    Ortho,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugmentationKind {
    Diff(Augmentation),
    /// Orthonormal completion of decimated block `i`.
    DecimatedOrtho(usize),
}

#[derive(Debug, Clone)]
enum Penalty {
    Diff(SecondDiffOp),
    Decimated(DecimatedDiffOp),
}

impl Penalty {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Penalty::Diff(d) => d.apply(x),
            Penalty::Decimated(a) => a.apply(x),
        }
    }
}

/// Invertible square operator `[U; A]` whose trailing rows are a penalty
/// operator `A` (either `D` or a decimated block of it).
#[derive(Debug, Clone)]
pub struct AugmentedDiffOp {
    kind: AugmentationKind,
    penalty: Penalty,
    u_rows: DenseMatrix,
    dbar: DenseMatrix,
    dbar_inv: DenseMatrix,
}

impl AugmentedDiffOp {
    pub fn new(dim: usize, variant: Augmentation) -> Result<Self> {
        let diff = SecondDiffOp::new(dim)?;
        let mut first = vec![0.0; dim];
        first[0] = 1.0;
        let mut second = vec![0.0; dim];
        second[0] = -2.0 * INV_SQRT5;
        second[1] = INV_SQRT5;
        let u_rows = match variant {
            Augmentation::Invert => vec![first, second],
            Augmentation::Ortho => {
                let basis = orthonormal_rows(&(0..diff.nrows()).map(|k| diff.dense_row(k)).collect::<Vec<_>>())?;
                let mut accepted: Vec<Vec<f64>> = Vec::with_capacity(2);
                for v in [first, second] {
                    let u = orthogonalize(v, &basis, &accepted, 1e-8).ok_or_else(|| {
                        Error::Construction("augmentation row is numerically in the row space of D".into())
                    })?;
                    accepted.push(u);
                }
                accepted
            }
        };
        Self::assemble(AugmentationKind::Diff(variant), Penalty::Diff(diff), u_rows)
    }

    /// `[U; A]` with `U` an orthonormal basis of the complement of `A`'s rows,
    /// obtained by orthogonalizing the canonical basis vectors in order.
    pub fn orthonormal_completion(a: &DecimatedDiffOp) -> Result<Self> {
        let dim = a.dim();
        let a_dense = a.to_dense();
        let a_rows: Vec<Vec<f64>> = (0..a.nrows()).map(|k| a_dense.row(k).to_vec()).collect();
        let needed = dim - a.nrows();
        let mut accepted: Vec<Vec<f64>> = Vec::with_capacity(needed);
        for j in 0..dim {
            if accepted.len() == needed {
                break;
            }
            let mut e = vec![0.0; dim];
            e[j] = 1.0;
            if let Some(u) = orthogonalize(e, &a_rows, &accepted, 1e-3) {
                accepted.push(u);
            }
        }
        if accepted.len() != needed {
            return Err(Error::Construction(format!(
                "orthonormal completion found {} of {needed} rows",
                accepted.len()
            )));
        }
        Self::assemble(
            AugmentationKind::DecimatedOrtho(a.block()),
            Penalty::Decimated(a.clone()),
            accepted,
        )
    }

    fn assemble(kind: AugmentationKind, penalty: Penalty, u_rows: Vec<Vec<f64>>) -> Result<Self> {
        let penalty_dense = match &penalty {
            Penalty::Diff(d) => d.to_dense(),
            Penalty::Decimated(a) => a.to_dense(),
        };
        let mut rows = u_rows.clone();
        rows.extend((0..penalty_dense.nrows()).map(|k| penalty_dense.row(k).to_vec()));
        let dbar = DenseMatrix::from_rows(&rows);
        let dbar_inv = dbar.inverse()?;
        Ok(Self {
            kind,
            penalty,
            u_rows: DenseMatrix::from_rows(&u_rows),
            dbar,
            dbar_inv,
        })
    }

    pub fn kind(&self) -> AugmentationKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dbar.ncols()
    }

    /// Number of leading (unpenalized) rows, i.e. the rows of `U`.
    pub fn n_free(&self) -> usize {
        self.u_rows.nrows()
    }

    pub fn u_rows(&self) -> &DenseMatrix {
        &self.u_rows
    }

    pub fn dense(&self) -> &DenseMatrix {
        &self.dbar
    }

    pub fn dense_inverse(&self) -> &DenseMatrix {
        &self.dbar_inv
    }

    /// `D̄ x`; the trailing rows go through the penalty operator itself so
    /// that `(D̄x)_{k+1:T}` is bit-identical to `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.u_rows.mul_vec(x);
        y.extend(self.penalty.apply(x));
        y
    }

    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        self.dbar.tr_mul_vec(x)
    }

    /// `D̄⁻¹ x`
    pub fn solve(&self, x: &[f64]) -> Vec<f64> {
        match self.kind {
            AugmentationKind::Diff(Augmentation::Invert) => forward_substitution(x),
            _ => self.dbar_inv.mul_vec(x),
        }
    }

    /// `D̄⁻ᵀ x`
    pub fn solve_transpose(&self, x: &[f64]) -> Vec<f64> {
        match self.kind {
            AugmentationKind::Diff(Augmentation::Invert) => back_substitution_transposed(x),
            _ => self.dbar_inv.tr_mul_vec(x),
        }
    }

    /// `D̄⁻¹ x` through the cached dense inverse, whatever the variant.
    pub fn solve_dense(&self, x: &[f64]) -> Vec<f64> {
        self.dbar_inv.mul_vec(x)
    }

    pub fn solve_transpose_dense(&self, x: &[f64]) -> Vec<f64> {
        self.dbar_inv.tr_mul_vec(x)
    }

    pub fn condition_number(&self) -> f64 {
        crate::linalg::condition_number(&self.dbar, &self.dbar_inv, 20_000)
    }
}

/// Row `i` (zero-based) of `D̄_I`: returns `(diagonal, [(col, coeff)])` for
/// the strictly-lower entries.
#[inline]
fn invert_row(i: usize) -> (f64, [(usize, f64); 2], usize) {
    match i {
        0 => (1.0, [(0, 0.0); 2], 0),
        1 => (INV_SQRT5, [(0, -2.0 * INV_SQRT5), (0, 0.0)], 1),
        _ => (INV_SQRT6, [(i - 2, INV_SQRT6), (i - 1, -2.0 * INV_SQRT6)], 2),
    }
}

/// Solves `D̄_I y = x` by banded forward substitution.
fn forward_substitution(x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for i in 0..x.len() {
        let (diag, lower, n) = invert_row(i);
        let mut acc = x[i];
        for &(j, c) in &lower[..n] {
            acc -= c * y[j];
        }
        y[i] = acc / diag;
    }
    y
}

/// Solves `D̄_Iᵀ y = x` by banded back substitution.
fn back_substitution_transposed(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut y = vec![0.0; n];
    // Column j of D̄_I holds the coefficients multiplying y_j in D̄_Iᵀ y.
    for j in (0..n).rev() {
        let mut acc = x[j];
        // Rows i > j with a nonzero in column j: i ∈ {j+1, j+2} (within band).
        for i in j + 1..n.min(j + 3) {
            let (_, lower, cnt) = invert_row(i);
            for &(col, c) in &lower[..cnt] {
                if col == j {
                    acc -= c * y[i];
                }
            }
        }
        let (diag, _, _) = invert_row(j);
        y[j] = acc / diag;
    }
    y
}

/// Orthonormalizes `rows` by modified Gram-Schmidt with re-orthogonalization.
fn orthonormal_rows(rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    for r in rows {
        let q = orthogonalize(r.clone(), &basis, &[], 1e-10)
            .ok_or_else(|| Error::Construction("rank-deficient penalty operator".into()))?;
        basis.push(q);
    }
    Ok(basis)
}

/// Removes the components of `v` along the orthonormal sets `a` and `b`
/// (two passes) and normalizes. Returns `None` when the residual norm falls
/// below `rel_tol` times the original norm.
fn orthogonalize(mut v: Vec<f64>, a: &[Vec<f64>], b: &[Vec<f64>], rel_tol: f64) -> Option<Vec<f64>> {
    let n0 = norm2(&v);
    for _ in 0..2 {
        for q in a.iter().chain(b) {
            let c = dot(q, &v);
            v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= c * qi);
        }
    }
    let n = norm2(&v);
    if n <= rel_tol * n0 {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= n);
    Some(v)
}
