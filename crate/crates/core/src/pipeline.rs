//! End-to-end orchestration: standardize, cross-validate, estimate the error
//! variance, fit every coefficient, attach inference, and select. This is
//! the layer the command-line binary calls into.

use serde::Serialize;

use crate::config::Tolerances;
use crate::data::{Dataset, Transform};
use crate::error::Result;
use crate::estimator::{
    attach_inference, estimate_sigma2_with_support, fit_all, Sigma2Estimate, Sigma2Options,
    SigmaDenominator, SpidrFit,
};
use crate::fdr::{estimate_dispersion_a, fdr_curve, select, DispersionEstimate, FdrCurve, SelectionResult};
use crate::penalty::{PenaltyFamily, PenaltySpec};
use crate::seed::{derive_seed, Domain};
use crate::solver::{cross_validate, path_on_design, CvResult, LambdaGrid};

/// Pipeline configuration; defaults follow the benchmark settings
/// (MCP with gamma 6, 5-fold CV, 100 log-spaced lambdas, q = 0.15).
#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub family: PenaltyFamily,
    pub gamma: f64,
    pub n_folds: usize,
    pub n_lambda: usize,
    pub lambda_min_ratio: Option<f64>,
    pub seed: u64,
    pub sigma_repeats: usize,
    pub sigma_denominator: SigmaDenominator,
    pub sigma2_override: Option<f64>,
    pub dispersion_override: Option<f64>,
    pub tolerances: Tolerances,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            family: PenaltyFamily::Mcp,
            gamma: 6.0,
            n_folds: 5,
            n_lambda: 100,
            lambda_min_ratio: None,
            seed: 0,
            sigma_repeats: 10,
            sigma_denominator: SigmaDenominator::NPlusS,
            sigma2_override: None,
            dispersion_override: None,
            tolerances: Tolerances::default(),
        }
    }
}

/// Everything the fit stage produces.
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub n: usize,
    pub p: usize,
    pub family: PenaltyFamily,
    pub gamma: f64,
    pub cv: CvResult,
    pub lambda_hat: f64,
    pub sigma2: Sigma2Estimate,
    /// Fully penalized solution at lambda_hat (standardized scale).
    pub full_beta: Vec<f64>,
    pub fit: SpidrFit,
    pub dispersion: DispersionEstimate,
    pub transform: Transform,
    pub warnings: Vec<String>,
}

impl FitOutput {
    /// Coefficients mapped back to the original predictor scale.
    pub fn beta_original(&self) -> Vec<f64> {
        self.fit
            .beta
            .iter()
            .enumerate()
            .map(|(j, &b)| self.transform.coef_to_original(j, b))
            .collect()
    }

    /// Standard errors on the original predictor scale.
    pub fn se_original(&self) -> Vec<f64> {
        self.fit
            .se
            .iter()
            .enumerate()
            .map(|(j, &s)| self.transform.coef_to_original(j, s))
            .collect()
    }

    pub fn intercept(&self) -> f64 {
        self.transform.intercept(&self.beta_original())
    }

    /// The effective dispersion value used downstream.
    pub fn dispersion_a(&self) -> f64 {
        self.dispersion.a
    }
}

/// Runs the full fit stage on raw data.
pub fn run_fit(raw: &Dataset, opts: &PipelineOptions) -> Result<FitOutput> {
    let data = raw.standardize()?;
    let tol = &opts.tolerances;
    let grid = LambdaGrid::from_data(&data, opts.n_lambda, opts.lambda_min_ratio)?;
    let cv = cross_validate(
        &data,
        opts.family,
        opts.gamma,
        &grid,
        opts.n_folds,
        derive_seed(opts.seed, Domain::Folds, 0),
        tol,
    )?;

    let prefix = &grid.values()[..=cv.lambda_hat_index];
    let full_path = path_on_design(
        data.y(),
        data.x_matrix(),
        data.excluded(),
        opts.family,
        opts.gamma,
        prefix,
        tol,
    )?;
    let full_beta = full_path.betas.last().expect("non-empty path").clone();

    let mut warnings = Vec::new();
    if !full_path.converged.iter().all(|&c| c) {
        warnings.push("fully penalized path had non-converged points".to_string());
    }

    let sigma2 = match opts.sigma2_override {
        Some(v) => Sigma2Estimate { value: v, per_repeat: Vec::new(), support_size: 0, truncated: false },
        None => estimate_sigma2_with_support(
            &data,
            &full_beta,
            &Sigma2Options {
                n_repeats: opts.sigma_repeats,
                denominator: opts.sigma_denominator,
                seed: derive_seed(opts.seed, Domain::SigmaSplit, 0),
            },
        )?,
    };
    if sigma2.truncated {
        warnings.push("sigma^2 split refit truncated the selected support".to_string());
    }

    let spec = PenaltySpec::new(opts.family, cv.lambda_hat, opts.gamma)?;
    let mut fit = fit_all(&data, &spec, Some(&full_beta), tol)?;
    attach_inference(&mut fit, &data, sigma2.value)?;

    let n_nonconverged = fit.flags.iter().filter(|f| f.non_converged).count();
    if n_nonconverged > 0 {
        warnings.push(format!("{n_nonconverged} per-coefficient fits did not converge"));
    }
    let n_collinear = fit.flags.iter().filter(|f| f.collinear).count();
    if n_collinear > 0 {
        warnings.push(format!("{n_collinear} coefficients excluded from inference (collinear)"));
    }
    let n_excluded = fit.flags.iter().filter(|f| f.excluded).count();
    if n_excluded > 0 {
        warnings.push(format!("{n_excluded} constant columns excluded"));
    }

    let mut dispersion = estimate_dispersion_a(&fit.z);
    if let Some(a) = opts.dispersion_override {
        dispersion = DispersionEstimate { a, sigma0: f64::NAN, n_central: 0, flagged: false };
    } else if dispersion.flagged {
        warnings.push("dispersion estimate degenerate; A forced to 0".to_string());
    }

    let transform = data.transform().expect("standardized data has a transform").clone();

    Ok(FitOutput {
        n: data.n(),
        p: data.p(),
        family: opts.family,
        gamma: opts.gamma,
        lambda_hat: cv.lambda_hat,
        cv,
        sigma2,
        full_beta,
        fit,
        dispersion,
        transform,
        warnings,
    })
}

/// Selection stage on a completed fit.
pub fn run_select(fit: &FitOutput, q: f64) -> Result<(SelectionResult, FdrCurve)> {
    let selection = select(&fit.fit.z, &fit.fit.se, &fit.fit.beta, fit.p, q, fit.dispersion_a())?;
    let curve = fdr_curve(&fit.fit.z, fit.p, fit.dispersion_a());
    Ok((selection, curve))
}

/// A lambda path of the semi-penalized estimate for one coefficient:
/// beta_j(lambda) over the grid, each point from a warm-started inner solve
/// on the j-residualized design.
#[derive(Debug, Clone, Serialize)]
pub struct SemiPath {
    pub j: usize,
    pub lambdas: Vec<f64>,
    pub beta_j: Vec<f64>,
}

pub fn semi_penalized_path(
    j: usize,
    data: &Dataset,
    family: PenaltyFamily,
    gamma: f64,
    grid: &LambdaGrid,
    tol: &Tolerances,
) -> Result<SemiPath> {
    use crate::linalg::{axpy, dot, Matrix};

    let n = data.n();
    let p = data.p();
    let xj = data.col(j);
    let xj_norm2 = dot(xj, xj);
    let y_tilde = crate::linalg::project_out_column(data.y(), j, data)?;

    let mut design = Matrix::zeros(n, p);
    let mut skip = vec![false; p];
    for k in 0..p {
        skip[k] = data.is_excluded(k) || k == j;
        if skip[k] {
            continue;
        }
        let src = data.col(k);
        let coef = dot(xj, src) / xj_norm2;
        let dst = design.col_mut(k);
        for i in 0..n {
            dst[i] = src[i] - coef * xj[i];
        }
    }

    let path = path_on_design(&y_tilde, &design, &skip, family, gamma, grid.values(), tol)?;
    let mut beta_j = Vec::with_capacity(path.len());
    for betas in &path.betas {
        let mut residual = data.y().to_vec();
        for (k, &b) in betas.iter().enumerate() {
            if b != 0.0 {
                axpy(-b, data.col(k), &mut residual);
            }
        }
        beta_j.push(dot(xj, &residual) / xj_norm2);
    }
    Ok(SemiPath { j, lambdas: grid.values().to_vec(), beta_j })
}
