//! Per-coefficient semi-penalized estimation: each beta_j is the least
//! squares coefficient of x_j on the residuals after a penalized fit of all
//! other predictors on the j-residualized design, plus variance estimation
//! for the resulting z-statistics.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::config::Tolerances;
use crate::data::{Dataset, IndexSet};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, kahan_mean, lstsq_min_norm, ols_fit_rows, project_out_column, project_out_set, Matrix};
use crate::penalty::{penalty_derivative, PenaltyFamily, PenaltySpec};
use crate::seed::{stream_rng, Domain};
use crate::solver::{cross_validate, solve_penalized, LambdaGrid};

/// Per-coefficient status flags.
#[derive(Debug, Clone, Copy, Default, serde::Serialize)]
pub struct CoefFlags {
    /// Inner solver reached its sweep cap without converging.
    pub non_converged: bool,
    /// x_j' Q x_j fell below the collinearity threshold; no se/z reported.
    pub collinear: bool,
    /// Constant column excluded at standardization.
    pub excluded: bool,
}

/// The per-coefficient estimates, their companion active sets, and (after
/// [`attach_inference`]) standard errors and z-statistics.
#[derive(Debug, Clone)]
pub struct SpidrFit {
    pub spec: PenaltySpec,
    pub beta: Vec<f64>,
    /// Ŝ_j: support of the inner penalized fit for coefficient j.
    pub s_hat: Vec<IndexSet>,
    /// Inner coefficients on Ŝ_j, aligned with `s_hat[j]`.
    pub beta_on_s: Vec<Vec<f64>>,
    /// Standard errors (NaN until inference is attached or when collinear).
    pub se: Vec<f64>,
    /// z_j = beta_j / se_j (NaN until inference is attached).
    pub z: Vec<f64>,
    pub sigma2_hat: Option<f64>,
    pub flags: Vec<CoefFlags>,
}

impl SpidrFit {
    pub fn p(&self) -> usize {
        self.beta.len()
    }

    pub fn all_converged(&self) -> bool {
        self.flags.iter().all(|f| !f.non_converged)
    }
}

/// Result of a single semi-penalized fit.
#[derive(Debug, Clone)]
pub struct FitOne {
    pub beta_j: f64,
    pub s_hat: IndexSet,
    pub beta_on_s: Vec<f64>,
    pub converged: bool,
}

/// Scratch buffers reused across per-coefficient fits.
struct FitScratch {
    design: Matrix,
    skip: Vec<bool>,
    warm: Vec<f64>,
}

impl FitScratch {
    fn new(n: usize, p: usize) -> Self {
        FitScratch { design: Matrix::zeros(n, p), skip: vec![false; p], warm: vec![0.0; p] }
    }
}

fn fit_one_inner(
    j: usize,
    data: &Dataset,
    spec: &PenaltySpec,
    warm_start: Option<&[f64]>,
    tol: &Tolerances,
    scratch: &mut FitScratch,
) -> Result<FitOne> {
    let n = data.n();
    let p = data.p();
    if j >= p {
        return Err(Error::invalid(format!("column index {j} out of range")));
    }
    if data.is_excluded(j) {
        return Err(Error::SingularColumn { j });
    }

    let xj = data.col(j);
    let xj_norm2 = dot(xj, xj);
    let y_tilde = project_out_column(data.y(), j, data)?;

    // Residualized design: column k becomes Q_j x_k; column j is frozen out.
    for k in 0..p {
        let dst = scratch.design.col_mut(k);
        scratch.skip[k] = data.is_excluded(k) || k == j;
        if scratch.skip[k] {
            dst.iter_mut().for_each(|v| *v = 0.0);
            continue;
        }
        let src = data.col(k);
        let coef = dot(xj, src) / xj_norm2;
        for i in 0..n {
            dst[i] = src[i] - coef * xj[i];
        }
    }

    match warm_start {
        Some(w) => {
            scratch.warm.copy_from_slice(w);
            scratch.warm[j] = 0.0;
        }
        None => scratch.warm.iter_mut().for_each(|v| *v = 0.0),
    }

    let inner = solve_penalized(&y_tilde, &scratch.design, &scratch.skip, spec, Some(&scratch.warm), tol);

    // Least squares of x_j on the residuals of the original data.
    let mut residual = data.y().to_vec();
    for &k in inner.active.iter() {
        axpy(-inner.beta[k], data.col(k), &mut residual);
    }
    let beta_j = dot(xj, &residual) / xj_norm2;
    let beta_on_s = inner.active.iter().map(|&k| inner.beta[k]).collect();

    Ok(FitOne { beta_j, s_hat: inner.active, beta_on_s, converged: inner.converged })
}

/// Semi-penalized estimate of a single coefficient: solve the penalized
/// problem on the j-residualized design, then regress y minus the fitted
/// part on x_j.
pub fn fit_one(
    j: usize,
    data: &Dataset,
    spec: &PenaltySpec,
    warm_start: Option<&[f64]>,
    tol: &Tolerances,
) -> Result<FitOne> {
    if !data.standardized() {
        return Err(Error::invalid("fit_one requires standardized data"));
    }
    let mut scratch = FitScratch::new(data.n(), data.p());
    fit_one_inner(j, data, spec, warm_start, tol, &mut scratch)
}

/// Semi-penalized estimates for every coefficient. Fits run in parallel with
/// per-worker scratch; the result is deterministic regardless of thread
/// count. `warm_start` (typically the fully penalized solution at the same
/// lambda) initializes each inner solve.
pub fn fit_all(
    data: &Dataset,
    spec: &PenaltySpec,
    warm_start: Option<&[f64]>,
    tol: &Tolerances,
) -> Result<SpidrFit> {
    if !data.standardized() {
        return Err(Error::invalid("fit_all requires standardized data"));
    }
    let p = data.p();
    let n = data.n();

    let results: Vec<Option<FitOne>> = (0..p)
        .into_par_iter()
        .map_init(
            || FitScratch::new(n, p),
            |scratch, j| {
                if data.is_excluded(j) {
                    Ok(None)
                } else {
                    fit_one_inner(j, data, spec, warm_start, tol, scratch).map(Some)
                }
            },
        )
        .collect::<Result<Vec<_>>>()?;

    let mut fit = SpidrFit {
        spec: *spec,
        beta: vec![0.0; p],
        s_hat: vec![IndexSet::empty(); p],
        beta_on_s: vec![Vec::new(); p],
        se: vec![f64::NAN; p],
        z: vec![f64::NAN; p],
        sigma2_hat: None,
        flags: vec![CoefFlags::default(); p],
    };
    for (j, res) in results.into_iter().enumerate() {
        match res {
            None => {
                fit.flags[j].excluded = true;
            }
            Some(one) => {
                fit.beta[j] = one.beta_j;
                fit.flags[j].non_converged = !one.converged;
                fit.s_hat[j] = one.s_hat;
                fit.beta_on_s[j] = one.beta_on_s;
            }
        }
    }
    Ok(fit)
}

/// Recomputes beta_j through the KKT-based alternative expression
/// (x_j'Q_S x_j)^{-1} x_j'[Q_S y + X_S Sigma_S^{-1} rho'(beta_S)] and returns
/// the absolute difference from the fitted value. `None` means the check was
/// skipped because Sigma_S (or the projected norm) is numerically singular.
pub fn alternative_expression_check(j: usize, fit: &SpidrFit, data: &Dataset) -> Option<f64> {
    if fit.flags[j].excluded {
        return None;
    }
    let set = &fit.s_hat[j];
    let xj = data.col(j);
    let q = project_out_set(xj, set, data);
    let denom = dot(xj, &q);
    if denom <= data.tolerances().collinearity_rel_tol * data.n() as f64 {
        return None;
    }
    let projected_y = dot(&q, data.y());
    if set.is_empty() {
        return Some(((projected_y / denom) - fit.beta[j]).abs());
    }

    let m = set.len();
    let nf = data.n() as f64;
    let sigma = DMatrix::from_fn(m, m, |r, c| {
        dot(data.col(set.as_slice()[r]), data.col(set.as_slice()[c])) / nf
    });
    // Reject numerically singular Sigma_S rather than inverting garbage.
    let svd = sigma.clone().svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(smax > 0.0) || smin < data.tolerances().rank_rel_tol * smax {
        return None;
    }
    let rho_dot = DVector::from_iterator(
        m,
        fit.beta_on_s[j].iter().map(|&b| penalty_derivative(b, &fit.spec)),
    );
    let w = lstsq_min_norm(sigma, rho_dot, data.tolerances().rank_rel_tol);
    let bias: f64 = set
        .iter()
        .enumerate()
        .map(|(c, &k)| dot(data.col(k), xj) * w[c])
        .sum();
    let alt = (projected_y + bias) / denom;
    Some((alt - fit.beta[j]).abs())
}

/// Which denominator the split-refit variance estimator uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum SigmaDenominator {
    /// n2 + |S|, as printed in the estimator's definition (default).
    NPlusS,
    /// The classical residual-variance convention n2 - |S|.
    NMinusS,
}

#[derive(Debug, Clone)]
pub struct Sigma2Options {
    pub n_repeats: usize,
    pub denominator: SigmaDenominator,
    pub seed: u64,
}

impl Default for Sigma2Options {
    fn default() -> Self {
        Sigma2Options { n_repeats: 10, denominator: SigmaDenominator::NPlusS, seed: 0 }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct Sigma2Estimate {
    pub value: f64,
    pub per_repeat: Vec<f64>,
    pub support_size: usize,
    /// Support was truncated to keep the split refit well-posed.
    pub truncated: bool,
}

/// Split-refit error variance: repeatedly split the rows in half, refit the
/// selected support by least squares on one half, and scale the prediction
/// error on the other half by n2 + |S|. `full_beta` is the fully penalized
/// solution whose support defines S (and whose magnitudes break ties when S
/// must be truncated).
pub fn estimate_sigma2_with_support(
    data: &Dataset,
    full_beta: &[f64],
    opts: &Sigma2Options,
) -> Result<Sigma2Estimate> {
    let n = data.n();
    if n < 4 {
        return Err(Error::invalid("need at least 4 observations to estimate sigma^2"));
    }
    if opts.n_repeats == 0 {
        return Err(Error::invalid("need at least 1 split repeat"));
    }
    let n1 = n.div_ceil(2);
    let n2 = n - n1;

    let mut support: Vec<usize> = IndexSet::from_support(full_beta).iter().cloned().collect();
    let mut truncated = false;
    if support.len() >= n1 {
        // Keep the n1 - 1 largest |coefficient| entries so the refit stays
        // well-posed.
        support.sort_by(|&a, &b| {
            full_beta[b].abs().partial_cmp(&full_beta[a].abs()).expect("finite coefficients")
        });
        support.truncate(n1 - 1);
        support.sort_unstable();
        truncated = true;
    }
    let set = IndexSet::from_unsorted(support, data.p())?;

    if opts.denominator == SigmaDenominator::NMinusS && n2 <= set.len() {
        return Err(Error::invalid("n2 - |S| denominator is not positive"));
    }

    let mut per_repeat = Vec::with_capacity(opts.n_repeats);
    for rep in 0..opts.n_repeats {
        let mut rng = stream_rng(opts.seed, Domain::SigmaSplit, rep as u64);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut d1: Vec<usize> = order[..n1].to_vec();
        let mut d2: Vec<usize> = order[n1..].to_vec();
        d1.sort_unstable();
        d2.sort_unstable();

        let b1 = ols_fit_rows(data.y(), &set, &d1, data);
        let mut rss = 0.0;
        for &i in &d2 {
            let mut pred = 0.0;
            for (c, &jcol) in set.iter().enumerate() {
                pred += data.col(jcol)[i] * b1[c];
            }
            let e = data.y()[i] - pred;
            rss += e * e;
        }
        let denom = match opts.denominator {
            SigmaDenominator::NPlusS => (n2 + set.len()) as f64,
            SigmaDenominator::NMinusS => (n2 - set.len()) as f64,
        };
        per_repeat.push(rss / denom);
    }

    Ok(Sigma2Estimate {
        value: kahan_mean(&per_repeat),
        per_repeat,
        support_size: set.len(),
        truncated,
    })
}

/// Convenience form that performs the cross-validated full fit internally:
/// CV selects lambda, a full-data fit at that lambda defines the support,
/// then the split-refit estimator runs.
pub fn estimate_sigma2(
    data: &Dataset,
    family: PenaltyFamily,
    gamma: f64,
    grid: &LambdaGrid,
    n_folds: usize,
    cv_seed: u64,
    opts: &Sigma2Options,
    tol: &Tolerances,
) -> Result<Sigma2Estimate> {
    let cv = cross_validate(data, family, gamma, grid, n_folds, cv_seed, tol)?;
    let prefix = &grid.values()[..=cv.lambda_hat_index];
    let path = crate::solver::path_on_design(
        data.y(),
        data.x_matrix(),
        data.excluded(),
        family,
        gamma,
        prefix,
        tol,
    )?;
    let full_beta = path.betas.last().expect("non-empty path");
    estimate_sigma2_with_support(data, full_beta, opts)
}

/// Fills in se and z: se_j^2 = sigma2 * (x_j' Q_{S_j} x_j)^{-1}. Coefficients
/// whose projected column norm falls below the collinearity threshold are
/// flagged and left out of inference.
pub fn attach_inference(fit: &mut SpidrFit, data: &Dataset, sigma2: f64) -> Result<()> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::invalid(format!("sigma2 must be positive, got {sigma2}")));
    }
    let results: Vec<Option<f64>> = (0..fit.p())
        .into_par_iter()
        .map(|j| {
            if fit.flags[j].excluded {
                return None;
            }
            let xj = data.col(j);
            let q = project_out_set(xj, &fit.s_hat[j], data);
            let denom = dot(xj, &q);
            if denom <= data.tolerances().collinearity_rel_tol * data.n() as f64 {
                None
            } else {
                Some(denom)
            }
        })
        .collect();

    for (j, denom) in results.into_iter().enumerate() {
        if fit.flags[j].excluded {
            continue;
        }
        match denom {
            None => {
                fit.flags[j].collinear = true;
                fit.se[j] = f64::NAN;
                fit.z[j] = f64::NAN;
            }
            Some(d) => {
                fit.se[j] = (sigma2 / d).sqrt();
                fit.z[j] = fit.beta[j] / fit.se[j];
            }
        }
    }
    fit.sigma2_hat = Some(sigma2);
    Ok(())
}

/// Estimated covariance between beta_j and beta_k:
/// sigma2 * x_j'Q_{S_j} Q_{S_k} x_k / ((x_j'Q_{S_j}x_j)(x_k'Q_{S_k}x_k)).
pub fn covariance(j: usize, k: usize, fit: &SpidrFit, data: &Dataset, sigma2: f64) -> Result<f64> {
    for &idx in &[j, k] {
        if fit.flags[idx].excluded || fit.flags[idx].collinear {
            return Err(Error::invalid(format!("coefficient {idx} is excluded from inference")));
        }
    }
    let qj = project_out_set(data.col(j), &fit.s_hat[j], data);
    let qk = project_out_set(data.col(k), &fit.s_hat[k], data);
    let dj = dot(data.col(j), &qj);
    let dk = dot(data.col(k), &qk);
    let floor = data.tolerances().collinearity_rel_tol * data.n() as f64;
    if dj <= floor || dk <= floor {
        return Err(Error::invalid("projected column norm below collinearity threshold"));
    }
    Ok(sigma2 * dot(&qj, &qk) / (dj * dk))
}
