//! Cyclic coordinate descent for the fully penalized criterion, lambda-grid
//! solution paths with warm starts, and k-fold cross validation.
//!
//! The solver works on any dense column-major design, so the same kernel
//! serves the full problem, per-fold subproblems and the residualized
//! designs used by the per-coefficient estimator.

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::config::Tolerances;
use crate::data::{Dataset, IndexSet};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, KahanSum, Matrix};
use crate::penalty::{penalty_derivative, penalty_value, univariate_minimizer, PenaltyFamily, PenaltySpec};
use crate::seed::seeded_rng;

/// Decreasing grid of penalty levels. The first value is
/// lambda_max = max_j |x_j'y| / n, the smallest lambda with an all-zero
/// solution; the last is `min_ratio * lambda_max`.
#[derive(Debug, Clone, Serialize)]
pub struct LambdaGrid {
    values: Vec<f64>,
    min_ratio: f64,
}

impl LambdaGrid {
    /// Log-spaced grid sized from the data. `min_ratio` defaults to 0.05 when
    /// p > n and 0.001 otherwise.
    pub fn from_data(data: &Dataset, n_lambda: usize, min_ratio: Option<f64>) -> Result<Self> {
        if n_lambda < 2 {
            return Err(Error::invalid("need at least 2 grid points"));
        }
        let n = data.n() as f64;
        let mut lambda_max = 0.0_f64;
        for j in 0..data.p() {
            if data.is_excluded(j) {
                continue;
            }
            lambda_max = lambda_max.max(dot(data.col(j), data.y()).abs() / n);
        }
        if !(lambda_max > 0.0) || !lambda_max.is_finite() {
            return Err(Error::invalid("lambda_max is zero; response is orthogonal to all predictors"));
        }
        let ratio = min_ratio.unwrap_or(if data.p() > data.n() { 0.05 } else { 0.001 });
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::invalid(format!("min_ratio must be in (0,1), got {ratio}")));
        }
        let log_max = lambda_max.ln();
        let log_min = (ratio * lambda_max).ln();
        let values = (0..n_lambda)
            .map(|k| {
                let f = k as f64 / (n_lambda - 1) as f64;
                (log_max + f * (log_min - log_max)).exp()
            })
            .collect();
        Ok(LambdaGrid { values, min_ratio: ratio })
    }

    /// Builds a grid from explicit values (strictly decreasing, positive).
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 1 || values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("grid values must be positive and finite"));
        }
        if values.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::invalid("grid values must be strictly decreasing"));
        }
        let min_ratio = values[values.len() - 1] / values[0];
        Ok(LambdaGrid { values, min_ratio })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lambda_max(&self) -> f64 {
        self.values[0]
    }

    pub fn min_ratio(&self) -> f64 {
        self.min_ratio
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Result of a single coordinate descent solve.
#[derive(Debug, Clone)]
pub struct CdFit {
    pub beta: Vec<f64>,
    pub active: IndexSet,
    pub objective: f64,
    pub sweeps: usize,
    pub converged: bool,
    /// Sweeps on which the objective increased beyond roundoff; should be 0.
    pub monotone_violations: usize,
}

/// KKT certificate for a reported solution.
#[derive(Debug, Clone, Copy)]
pub struct KktReport {
    /// max over active j of |x_j'r/n - rho'(b_j)| (stationarity residual).
    pub max_active_violation: f64,
    /// max over inactive j of (|x_j'r/n| - lambda)_+ (subgradient excess).
    pub max_inactive_excess: f64,
}

impl KktReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_active_violation <= tol && self.max_inactive_excess <= tol
    }
}

struct CdWorkspace {
    residual: Vec<f64>,
    curvature: Vec<f64>,
}

fn objective_value(residual: &[f64], beta: &[f64], spec: &PenaltySpec, n: f64) -> f64 {
    let mut pen = 0.0;
    for &b in beta {
        if b != 0.0 {
            pen += penalty_value(b, spec);
        }
    }
    0.5 * dot(residual, residual) / n + pen
}

/// One pass over the listed coordinates; returns (max |change|, activated?).
fn sweep(
    y_len: f64,
    x: &Matrix,
    beta: &mut [f64],
    ws: &mut CdWorkspace,
    spec: &PenaltySpec,
    coords: &[usize],
) -> (f64, bool) {
    let mut max_delta = 0.0_f64;
    let mut activated = false;
    for &j in coords {
        let dj = ws.curvature[j];
        if dj <= 0.0 {
            continue;
        }
        let xj = x.col(j);
        let z = dot(xj, &ws.residual) / y_len + dj * beta[j];
        // curvature is validated positive, so the minimizer cannot fail
        let b_new = univariate_minimizer(z, dj, spec).expect("positive curvature");
        let delta = b_new - beta[j];
        if delta != 0.0 {
            if beta[j] == 0.0 && b_new != 0.0 {
                activated = true;
            }
            axpy(-delta, xj, &mut ws.residual);
            beta[j] = b_new;
            max_delta = max_delta.max(delta.abs());
        }
    }
    (max_delta, activated)
}

/// Coordinate descent on an explicit design. `skip[j]` freezes coordinate j
/// at zero (flagged constant columns, or the held-out column in residualized
/// fits). Columns need not be normalized; per-coordinate curvature is
/// ||x_j||^2 / n.
pub fn solve_penalized(
    y: &[f64],
    x: &Matrix,
    skip: &[bool],
    spec: &PenaltySpec,
    warm_start: Option<&[f64]>,
    tol: &Tolerances,
) -> CdFit {
    let n = y.len();
    let nf = n as f64;
    let p = x.n_cols();
    debug_assert_eq!(x.n_rows(), n);
    debug_assert_eq!(skip.len(), p);

    let mut curvature = vec![0.0; p];
    for j in 0..p {
        if skip[j] {
            continue;
        }
        let d = dot(x.col(j), x.col(j)) / nf;
        // Near-zero columns cannot be updated stably; freeze them at zero.
        if d > 1e-12 {
            curvature[j] = d;
        }
    }

    let mut beta = vec![0.0; p];
    if let Some(w) = warm_start {
        debug_assert_eq!(w.len(), p);
        for j in 0..p {
            if curvature[j] > 0.0 {
                beta[j] = w[j];
            }
        }
    }

    let mut residual = y.to_vec();
    for j in 0..p {
        if beta[j] != 0.0 {
            axpy(-beta[j], x.col(j), &mut residual);
        }
    }

    let mut ws = CdWorkspace { residual, curvature };
    let all_coords: Vec<usize> = (0..p).filter(|&j| ws.curvature[j] > 0.0).collect();

    let mut obj_prev = objective_value(&ws.residual, &beta, spec, nf);
    let mut monotone_violations = 0usize;
    let mut sweeps = 0usize;
    let mut converged = false;

    let check_monotone = |obj_prev: &mut f64, ws: &CdWorkspace, beta: &[f64], violations: &mut usize| {
        let obj = objective_value(&ws.residual, beta, spec, nf);
        if obj > *obj_prev + 1e-12 * obj_prev.abs() + 1e-15 {
            *violations += 1;
        }
        *obj_prev = obj;
    };

    'outer: while sweeps < tol.max_sweeps {
        // Full sweep: updates everything and detects activations.
        sweep(nf, x, &mut beta, &mut ws, spec, &all_coords);
        sweeps += 1;
        check_monotone(&mut obj_prev, &ws, &beta, &mut monotone_violations);

        // Iterate on the current active set until stable.
        loop {
            let active: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
            if active.is_empty() {
                break;
            }
            let (delta, _) = sweep(nf, x, &mut beta, &mut ws, spec, &active);
            sweeps += 1;
            check_monotone(&mut obj_prev, &ws, &beta, &mut monotone_violations);
            if delta < tol.cd_tol {
                break;
            }
            if sweeps >= tol.max_sweeps {
                break 'outer;
            }
        }

        // Final full sweep: converged only if nothing activates or moves.
        let (delta, activated) = sweep(nf, x, &mut beta, &mut ws, spec, &all_coords);
        sweeps += 1;
        check_monotone(&mut obj_prev, &ws, &beta, &mut monotone_violations);
        if !activated && delta < tol.cd_tol {
            converged = true;
            break;
        }
    }

    CdFit {
        active: IndexSet::from_support(&beta),
        objective: obj_prev,
        beta,
        sweeps,
        converged,
        monotone_violations,
    }
}

/// KKT residuals of `beta` for the penalized criterion on (y, x).
pub fn kkt_check(y: &[f64], x: &Matrix, skip: &[bool], beta: &[f64], spec: &PenaltySpec) -> KktReport {
    let nf = y.len() as f64;
    let mut residual = y.to_vec();
    for j in 0..x.n_cols() {
        if beta[j] != 0.0 {
            axpy(-beta[j], x.col(j), &mut residual);
        }
    }
    let mut max_active = 0.0_f64;
    let mut max_inactive = 0.0_f64;
    for j in 0..x.n_cols() {
        if skip[j] {
            continue;
        }
        let g = dot(x.col(j), &residual) / nf;
        if beta[j] != 0.0 {
            max_active = max_active.max((g - penalty_derivative(beta[j], spec)).abs());
        } else {
            max_inactive = max_inactive.max((g.abs() - spec.lambda).max(0.0));
        }
    }
    KktReport { max_active_violation: max_active, max_inactive_excess: max_inactive }
}

/// Solves the penalized criterion at a single lambda on (a row subset of) a
/// standardized dataset. `rows` restricts to an observation subset.
pub fn solve_at_lambda(
    data: &Dataset,
    spec: &PenaltySpec,
    warm_start: Option<&[f64]>,
    rows: Option<&[usize]>,
    tol: &Tolerances,
) -> Result<CdFit> {
    if !data.standardized() {
        return Err(Error::invalid("solve_at_lambda requires standardized data"));
    }
    match rows {
        None => Ok(solve_penalized(data.y(), data.x_matrix(), data.excluded(), spec, warm_start, tol)),
        Some(rows) => {
            let x = data.x_matrix().select_rows(rows);
            let y: Vec<f64> = rows.iter().map(|&i| data.y()[i]).collect();
            Ok(solve_penalized(&y, &x, data.excluded(), spec, warm_start, tol))
        }
    }
}

/// Coefficient paths over a lambda grid.
#[derive(Debug, Clone)]
pub struct PathFit {
    pub lambdas: Vec<f64>,
    /// One coefficient vector per lambda, in grid order.
    pub betas: Vec<Vec<f64>>,
    pub active_sets: Vec<IndexSet>,
    pub objectives: Vec<f64>,
    pub sweeps: Vec<usize>,
    pub converged: Vec<bool>,
}

impl PathFit {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }
}

/// Warm-started path solve on an explicit design.
pub fn path_on_design(
    y: &[f64],
    x: &Matrix,
    skip: &[bool],
    family: PenaltyFamily,
    gamma: f64,
    lambdas: &[f64],
    tol: &Tolerances,
) -> Result<PathFit> {
    let mut out = PathFit {
        lambdas: lambdas.to_vec(),
        betas: Vec::with_capacity(lambdas.len()),
        active_sets: Vec::with_capacity(lambdas.len()),
        objectives: Vec::with_capacity(lambdas.len()),
        sweeps: Vec::with_capacity(lambdas.len()),
        converged: Vec::with_capacity(lambdas.len()),
    };
    let mut warm: Option<Vec<f64>> = None;
    for &lambda in lambdas {
        let spec = PenaltySpec::new(family, lambda, gamma)?;
        let fit = solve_penalized(y, x, skip, &spec, warm.as_deref(), tol);
        warm = Some(fit.beta.clone());
        out.active_sets.push(fit.active);
        out.objectives.push(fit.objective);
        out.sweeps.push(fit.sweeps);
        out.converged.push(fit.converged);
        out.betas.push(fit.beta);
    }
    Ok(out)
}

/// Warm-started solution path on a standardized dataset.
pub fn solve_path(
    data: &Dataset,
    family: PenaltyFamily,
    gamma: f64,
    grid: &LambdaGrid,
    tol: &Tolerances,
) -> Result<PathFit> {
    if !data.standardized() {
        return Err(Error::invalid("solve_path requires standardized data"));
    }
    path_on_design(data.y(), data.x_matrix(), data.excluded(), family, gamma, grid.values(), tol)
}

/// Cross-validation summary over a lambda grid.
#[derive(Debug, Clone, Serialize)]
pub struct CvResult {
    pub lambdas: Vec<f64>,
    /// Mean held-out squared prediction error per lambda.
    pub cv_mean: Vec<f64>,
    /// Standard error over folds per lambda.
    pub cv_se: Vec<f64>,
    pub lambda_hat: f64,
    pub lambda_hat_index: usize,
    pub n_folds: usize,
    pub seed: u64,
}

/// Deterministic seeded k-fold cross validation: indices are shuffled once
/// and dealt round-robin. `lambda_hat` minimizes the mean held-out error;
/// ties go to the larger lambda.
pub fn cross_validate(
    data: &Dataset,
    family: PenaltyFamily,
    gamma: f64,
    grid: &LambdaGrid,
    n_folds: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<CvResult> {
    if !data.standardized() {
        return Err(Error::invalid("cross_validate requires standardized data"));
    }
    if n_folds < 2 {
        return Err(Error::invalid("need at least 2 folds"));
    }
    let n = data.n();
    if n / n_folds < 2 {
        return Err(Error::invalid(format!(
            "fold would have fewer than 2 observations (n={n}, folds={n_folds})"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seeded_rng(seed);
    order.shuffle(&mut rng);
    let mut fold_of = vec![0usize; n];
    for (pos, &idx) in order.iter().enumerate() {
        fold_of[idx] = pos % n_folds;
    }

    let n_lambda = grid.len();
    // fold_err[f][l]: mean squared prediction error of fold f at lambda l.
    let mut fold_err = vec![vec![0.0_f64; n_lambda]; n_folds];

    for f in 0..n_folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
        let x_train = data.x_matrix().select_rows(&train);
        let y_train: Vec<f64> = train.iter().map(|&i| data.y()[i]).collect();
        let path = path_on_design(&y_train, &x_train, data.excluded(), family, gamma, grid.values(), tol)?;

        for (l, beta) in path.betas.iter().enumerate() {
            let mut pred = vec![0.0_f64; test.len()];
            for &j in path.active_sets[l].iter() {
                let col = data.col(j);
                let b = beta[j];
                for (k, &i) in test.iter().enumerate() {
                    pred[k] += b * col[i];
                }
            }
            let mut sse = 0.0;
            for (k, &i) in test.iter().enumerate() {
                let e = data.y()[i] - pred[k];
                sse += e * e;
            }
            fold_err[f][l] = sse / test.len() as f64;
        }
    }

    let mut cv_mean = Vec::with_capacity(n_lambda);
    let mut cv_se = Vec::with_capacity(n_lambda);
    for l in 0..n_lambda {
        let mut acc = KahanSum::default();
        for f in 0..n_folds {
            acc.add(fold_err[f][l]);
        }
        let mean = acc.sum() / n_folds as f64;
        let mut var = 0.0;
        for f in 0..n_folds {
            let d = fold_err[f][l] - mean;
            var += d * d;
        }
        var /= (n_folds - 1) as f64;
        cv_mean.push(mean);
        cv_se.push((var / n_folds as f64).sqrt());
    }

    let mut best = 0usize;
    for l in 1..n_lambda {
        if cv_mean[l] < cv_mean[best] {
            best = l;
        }
    }

    Ok(CvResult {
        lambdas: grid.values().to_vec(),
        lambda_hat: grid.values()[best],
        lambda_hat_index: best,
        cv_mean,
        cv_se,
        n_folds,
        seed,
    })
}
