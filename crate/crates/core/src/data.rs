//! Response/predictor container, standardization and index sets.

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

/// Record of the centering/scaling applied by [`Dataset::standardize`], kept
/// so fitted coefficients can be mapped back to the original scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Transform {
    pub x_center: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub y_center: f64,
}

impl Transform {
    /// Maps a coefficient on the standardized scale back to the original scale.
    pub fn coef_to_original(&self, j: usize, beta_std: f64) -> f64 {
        beta_std / self.x_scale[j]
    }

    /// Intercept implied by original-scale coefficients.
    pub fn intercept(&self, beta_original: &[f64]) -> f64 {
        let mut acc = self.y_center;
        for (j, &b) in beta_original.iter().enumerate() {
            acc -= b * self.x_center[j];
        }
        acc
    }
}

/// A response vector and an n-by-p predictor matrix.
///
/// Immutable after construction; safe to share across worker threads.
#[derive(Debug, Clone)]
pub struct Dataset {
    y: Vec<f64>,
    x: Matrix,
    col_norms: Vec<f64>,
    standardized: bool,
    excluded: Vec<bool>,
    transform: Option<Transform>,
    tol: Tolerances,
}

impl Dataset {
    /// Wraps raw data. Requires n >= 2, p >= 1 and finite entries.
    pub fn new(y: Vec<f64>, x: Matrix) -> Result<Self> {
        if x.n_rows() != y.len() {
            return Err(Error::invalid(format!(
                "response length {} does not match {} rows",
                y.len(),
                x.n_rows()
            )));
        }
        if y.len() < 2 {
            return Err(Error::invalid("need at least 2 observations"));
        }
        if x.n_cols() < 1 {
            return Err(Error::invalid("need at least 1 predictor"));
        }
        if y.iter().any(|v| !v.is_finite()) || x.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite entry in data"));
        }
        let col_norms = (0..x.n_cols()).map(|j| dot(x.col(j), x.col(j)).sqrt()).collect();
        let p = x.n_cols();
        Ok(Dataset {
            y,
            x,
            col_norms,
            standardized: false,
            excluded: vec![false; p],
            transform: None,
            tol: Tolerances::default(),
        })
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.y.len()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.x.n_cols()
    }

    #[inline]
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        self.x.col(j)
    }

    pub fn x_matrix(&self) -> &Matrix {
        &self.x
    }

    pub fn col_norms(&self) -> &[f64] {
        &self.col_norms
    }

    #[inline]
    pub fn is_excluded(&self, j: usize) -> bool {
        self.excluded[j]
    }

    pub fn excluded(&self) -> &[bool] {
        &self.excluded
    }

    pub fn standardized(&self) -> bool {
        self.standardized
    }

    pub fn transform(&self) -> Option<&Transform> {
        self.transform.as_ref()
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    /// Centers y and each predictor column, and rescales columns so that
    /// ||x_j||^2 = n. Constant columns are flagged and excluded rather than
    /// scaled (their scale would be zero); their entries are set to 0.
    ///
    /// The applied transform is recorded (and composed with any previous one)
    /// so results can be reported on the original scale.
    pub fn standardize(&self) -> Result<Dataset> {
        let n = self.n();
        if n < 2 {
            return Err(Error::invalid("need at least 2 observations to standardize"));
        }
        let nf = n as f64;
        let p = self.p();
        let mut x = self.x.clone();
        let mut centers = vec![0.0; p];
        let mut scales = vec![1.0; p];
        let mut excluded = self.excluded.clone();

        for j in 0..p {
            let col = x.col_mut(j);
            let mean = col.iter().sum::<f64>() / nf;
            let mut ss = 0.0;
            for v in col.iter() {
                let d = v - mean;
                ss += d * d;
            }
            let scale = (ss / nf).sqrt();
            let max_abs = col.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if scale <= 1e-12 * max_abs.max(1.0) {
                // Constant column: flag and zero out so downstream code can
                // skip it without producing NaN.
                excluded[j] = true;
                centers[j] = mean;
                scales[j] = 1.0;
                col.iter_mut().for_each(|v| *v = 0.0);
            } else {
                centers[j] = mean;
                scales[j] = scale;
                for v in col.iter_mut() {
                    *v = (*v - mean) / scale;
                }
            }
        }

        let y_mean = self.y.iter().sum::<f64>() / nf;
        let y: Vec<f64> = self.y.iter().map(|v| v - y_mean).collect();

        let transform = match &self.transform {
            None => Transform { x_center: centers, x_scale: scales, y_center: y_mean },
            Some(prev) => {
                // x -> (x - c1)/s1 -> ((x - c1)/s1 - c2)/s2 = (x - (c1 + c2 s1))/(s1 s2)
                let x_center = prev
                    .x_center
                    .iter()
                    .zip(prev.x_scale.iter())
                    .zip(centers.iter())
                    .map(|((&c1, &s1), &c2)| c1 + c2 * s1)
                    .collect();
                let x_scale = prev
                    .x_scale
                    .iter()
                    .zip(scales.iter())
                    .map(|(&s1, &s2)| s1 * s2)
                    .collect();
                Transform { x_center, x_scale, y_center: prev.y_center + y_mean }
            }
        };

        let col_norms = (0..p)
            .map(|j| if excluded[j] { 0.0 } else { nf.sqrt() })
            .collect();

        Ok(Dataset {
            y,
            x,
            col_norms,
            standardized: true,
            excluded,
            transform: Some(transform),
            tol: self.tol,
        })
    }
}

/// Sorted set of distinct column indices (0-based internally; reports are
/// 1-based at the I/O boundary).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn empty() -> Self {
        IndexSet(Vec::new())
    }

    /// Builds a set from arbitrary indices; sorts, dedups and bound-checks.
    pub fn from_unsorted(mut indices: Vec<usize>, p: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&last) = indices.last() {
            if last >= p {
                return Err(Error::invalid(format!("index {last} out of range for p={p}")));
            }
        }
        Ok(IndexSet(indices))
    }

    /// Support of a coefficient vector: strictly nonzero entries.
    pub fn from_support(beta: &[f64]) -> Self {
        IndexSet(
            beta.iter()
                .enumerate()
                .filter(|(_, &b)| b != 0.0)
                .map(|(j, _)| j)
                .collect(),
        )
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, usize> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    /// The set with one element removed (S \ {j}).
    pub fn without(&self, j: usize) -> IndexSet {
        IndexSet(self.0.iter().cloned().filter(|&k| k != j).collect())
    }

    /// Size of the intersection with another set.
    pub fn intersection_len(&self, other: &IndexSet) -> usize {
        let (mut i, mut k, mut count) = (0, 0, 0);
        while i < self.0.len() && k < other.0.len() {
            match self.0[i].cmp(&other.0[k]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => k += 1,
                std::cmp::Ordering::Equal => {
                    count += 1;
                    i += 1;
                    k += 1;
                }
            }
        }
        count
    }
}

impl<'a> IntoIterator for &'a IndexSet {
    type Item = &'a usize;
    type IntoIter = std::slice::Iter<'a, usize>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(cols: &[Vec<f64>], y: Vec<f64>) -> Dataset {
        Dataset::new(y, Matrix::from_columns(cols).unwrap()).unwrap()
    }

    #[test]
    fn standardize_centers_and_scales() {
        let d = toy(&[vec![1.0, 2.0, 3.0]], vec![1.0, 0.0, 2.0]);
        let s = d.standardize().unwrap();
        let col = s.col(0);
        let n = 3.0_f64;
        assert!((col.iter().sum::<f64>()).abs() < 1e-12);
        assert!((dot(col, col) - n).abs() < 1e-10);
        // (1,2,3) centered is (-1,0,1); scaled so the squared norm is 3.
        let expect = (n / 2.0_f64).sqrt();
        assert!((col[0] + expect).abs() < 1e-12);
        assert!((col[2] - expect).abs() < 1e-12);
        assert!(col[1].abs() < 1e-12);
        assert!((s.y().iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn standardize_is_idempotent() {
        let d = toy(&[vec![1.0, 4.0, -2.0, 0.5]], vec![0.0, 1.0, -1.0, 2.0]);
        let s1 = d.standardize().unwrap();
        let s2 = s1.standardize().unwrap();
        for (a, b) in s1.col(0).iter().zip(s2.col(0)) {
            assert!((a - b).abs() < 1e-10);
        }
        // Composed transform still maps back to the original scale.
        let t1 = s1.transform().unwrap();
        let t2 = s2.transform().unwrap();
        assert!((t1.x_center[0] - t2.x_center[0]).abs() < 1e-10);
        assert!((t1.x_scale[0] - t2.x_scale[0]).abs() < 1e-10 * t1.x_scale[0].abs());
    }

    #[test]
    fn constant_column_is_flagged_not_fatal() {
        let d = toy(&[vec![5.0, 5.0, 5.0], vec![1.0, 2.0, 4.0]], vec![1.0, 2.0, 3.0]);
        let s = d.standardize().unwrap();
        assert!(s.is_excluded(0));
        assert!(!s.is_excluded(1));
        assert!(s.col(0).iter().all(|v| *v == 0.0));
        assert!(s.col(0).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rejects_tiny_or_nonfinite_input() {
        assert!(Dataset::new(vec![1.0], Matrix::from_columns(&[vec![1.0]]).unwrap()).is_err());
        assert!(Dataset::new(
            vec![1.0, f64::NAN],
            Matrix::from_columns(&[vec![1.0, 2.0]]).unwrap()
        )
        .is_err());
    }

    #[test]
    fn index_set_basics() {
        let s = IndexSet::from_unsorted(vec![3, 1, 3, 0], 5).unwrap();
        assert_eq!(s.as_slice(), &[0, 1, 3]);
        assert!(s.contains(3));
        assert!(!s.contains(2));
        assert_eq!(s.without(1).as_slice(), &[0, 3]);
        assert!(IndexSet::from_unsorted(vec![5], 5).is_err());
        let t = IndexSet::from_support(&[0.0, -1.0, 0.0, 2.0]);
        assert_eq!(t.as_slice(), &[1, 3]);
        assert_eq!(s.intersection_len(&t), 2);
    }
}
