//! Column-major dense storage and the small least-squares kernels behind the
//! projection operators.
//!
//! Projections are never materialized as n-by-n matrices: single-column
//! projections are rank-one updates, and set projections go through a
//! minimum-norm least squares solve on the n-by-|A| subdesign.

use nalgebra::{DMatrix, DVector};

use crate::data::{Dataset, IndexSet};
use crate::error::{Error, Result};

/// Dense column-major matrix; columns are contiguous slices.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Matrix { n_rows, n_cols, data: vec![0.0; n_rows * n_cols] }
    }

    /// Builds a matrix from column slices; all columns must share a length.
    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        if cols.is_empty() {
            return Err(Error::invalid("matrix needs at least one column"));
        }
        let n_rows = cols[0].len();
        if cols.iter().any(|c| c.len() != n_rows) {
            return Err(Error::invalid("ragged columns"));
        }
        let mut data = Vec::with_capacity(n_rows * cols.len());
        for c in cols {
            data.extend_from_slice(c);
        }
        Ok(Matrix { n_rows, n_cols: cols.len(), data })
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n_rows..(j + 1) * self.n_rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.n_rows..(j + 1) * self.n_rows]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.n_rows + i]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Copies the given rows into a new matrix with the same column layout.
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(rows.len(), self.n_cols);
        for j in 0..self.n_cols {
            let src = self.col(j);
            let dst = out.col_mut(j);
            for (k, &i) in rows.iter().enumerate() {
                dst[k] = src[i];
            }
        }
        out
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// y += alpha * x
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Compensated (Kahan) accumulator for order-stable means.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    c: f64,
}

impl KahanSum {
    pub fn add(&mut self, value: f64) {
        let y = value - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn sum(&self) -> f64 {
        self.sum
    }
}

pub fn kahan_mean(values: &[f64]) -> f64 {
    let mut acc = KahanSum::default();
    for &v in values {
        acc.add(v);
    }
    acc.sum() / values.len() as f64
}

/// Minimum-norm least squares solution of `a x = b`, with singular values
/// below `rank_rel_tol * sigma_max` treated as zero.
pub fn lstsq_min_norm(a: DMatrix<f64>, b: DVector<f64>, rank_rel_tol: f64) -> DVector<f64> {
    let ncols = a.ncols();
    if ncols == 0 {
        return DVector::zeros(0);
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    if smax <= 0.0 {
        return DVector::zeros(ncols);
    }
    svd.solve(&b, rank_rel_tol * smax)
        .unwrap_or_else(|_| DVector::zeros(ncols))
}

/// Stacks the columns of `data` named by `set` into a dense nalgebra matrix.
pub(crate) fn subdesign(data: &Dataset, set: &IndexSet) -> DMatrix<f64> {
    let n = data.n();
    let mut m = DMatrix::zeros(n, set.len());
    for (c, &j) in set.iter().enumerate() {
        let col = data.col(j);
        for i in 0..n {
            m[(i, c)] = col[i];
        }
    }
    m
}

/// Q_j v = v - x_j (x_j'v)/(x_j'x_j), as a rank-one update.
pub fn project_out_column(v: &[f64], j: usize, data: &Dataset) -> Result<Vec<f64>> {
    if j >= data.p() {
        return Err(Error::invalid(format!("column index {j} out of range")));
    }
    let xj = data.col(j);
    let norm2 = dot(xj, xj);
    if data.is_excluded(j) || norm2 <= 0.0 {
        return Err(Error::SingularColumn { j });
    }
    let mut out = v.to_vec();
    let coef = dot(xj, v) / norm2;
    axpy(-coef, xj, &mut out);
    Ok(out)
}

/// Residual of `v` after least squares on the columns in `set`.
///
/// Rank deficiency is resolved by a minimum-norm solve, so the result is the
/// orthogonal-projection residual even for collinear subdesigns.
pub fn project_out_set(v: &[f64], set: &IndexSet, data: &Dataset) -> Vec<f64> {
    if set.is_empty() {
        return v.to_vec();
    }
    let coefs = ols_fit(v, set, data);
    let mut out = v.to_vec();
    for (c, &j) in set.iter().enumerate() {
        axpy(-coefs[c], data.col(j), &mut out);
    }
    out
}

/// Least squares coefficients of `y` on the columns in `set` (minimum-norm on
/// rank deficiency). The returned vector is aligned with `set`'s order.
pub fn ols_fit(y: &[f64], set: &IndexSet, data: &Dataset) -> Vec<f64> {
    if set.is_empty() {
        return Vec::new();
    }
    let a = subdesign(data, set);
    let b = DVector::from_column_slice(y);
    let sol = lstsq_min_norm(a, b, data.tolerances().rank_rel_tol);
    sol.iter().cloned().collect()
}

/// Least squares on a row subset; used by the split-refit variance estimator.
pub fn ols_fit_rows(y: &[f64], set: &IndexSet, rows: &[usize], data: &Dataset) -> Vec<f64> {
    if set.is_empty() {
        return Vec::new();
    }
    let mut a = DMatrix::zeros(rows.len(), set.len());
    for (c, &j) in set.iter().enumerate() {
        let col = data.col(j);
        for (r, &i) in rows.iter().enumerate() {
            a[(r, c)] = col[i];
        }
    }
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|&i| y[i]));
    let sol = lstsq_min_norm(a, b, data.tolerances().rank_rel_tol);
    sol.iter().cloned().collect()
}
