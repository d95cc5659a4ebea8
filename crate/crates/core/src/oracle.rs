//! Ideal estimator and the signal-strength and stickiness diagnostics.
//!
//! The ideal fit requires the true support, so it only applies to simulated
//! data; the `simulate` command reports agreement between the semi-penalized
//! estimates and this oracle.

use crate::data::{Dataset, IndexSet};
use crate::linalg::{dot, project_out_set};

/// Per-coefficient ideal estimates and signal multipliers
/// m_j = (x_j' Q_{S_j} x_j)^{1/2}.
#[derive(Debug, Clone)]
pub struct IdealFit {
    pub beta_tilde: Vec<f64>,
    pub m: Vec<f64>,
    /// x_j lies in the span of X_{S_j}; the ideal estimate is undefined.
    pub flagged: Vec<bool>,
}

/// OLS of y on {j} union S_j for every j, via the closed form
/// beta_tilde_j = (x_j' Q_{S_j} x_j)^{-1} x_j' Q_{S_j} y.
pub fn ideal_fit(data: &Dataset, true_support: &IndexSet) -> IdealFit {
    let p = data.p();
    let floor = data.tolerances().collinearity_rel_tol * data.n() as f64;
    let mut out = IdealFit {
        beta_tilde: vec![f64::NAN; p],
        m: vec![0.0; p],
        flagged: vec![false; p],
    };
    for j in 0..p {
        if data.is_excluded(j) {
            out.flagged[j] = true;
            continue;
        }
        let s_j = true_support.without(j);
        let q = project_out_set(data.col(j), &s_j, data);
        let m2 = dot(data.col(j), &q);
        out.m[j] = m2.max(0.0).sqrt();
        if m2 <= floor {
            out.flagged[j] = true;
        } else {
            out.beta_tilde[j] = dot(&q, data.y()) / m2;
        }
    }
    out
}

/// Var(beta_tilde_j) = sigma^2 (x_j' Q_{S_j} x_j)^{-1}.
pub fn ideal_variance(j: usize, data: &Dataset, true_support: &IndexSet, sigma2: f64) -> Option<f64> {
    let s_j = true_support.without(j);
    let q = project_out_set(data.col(j), &s_j, data);
    let m2 = dot(data.col(j), &q);
    if m2 <= data.tolerances().collinearity_rel_tol * data.n() as f64 {
        None
    } else {
        Some(sigma2 / m2)
    }
}

/// Cov(beta_tilde_j, beta_tilde_k) per the ideal-estimator covariance formula.
pub fn ideal_covariance(
    j: usize,
    k: usize,
    data: &Dataset,
    true_support: &IndexSet,
    sigma2: f64,
) -> Option<f64> {
    let qj = project_out_set(data.col(j), &true_support.without(j), data);
    let qk = project_out_set(data.col(k), &true_support.without(k), data);
    let dj = dot(data.col(j), &qj);
    let dk = dot(data.col(k), &qk);
    let floor = data.tolerances().collinearity_rel_tol * data.n() as f64;
    if dj <= floor || dk <= floor {
        None
    } else {
        Some(sigma2 * dot(&qj, &qk) / (dj * dk))
    }
}

/// Correlation of the ideal z-scores:
/// x_j'Q_{S_j}Q_{S_k}x_k / (m_j m_k).
pub fn ideal_z_covariance(j: usize, k: usize, data: &Dataset, true_support: &IndexSet) -> Option<f64> {
    let qj = project_out_set(data.col(j), &true_support.without(j), data);
    let qk = project_out_set(data.col(k), &true_support.without(k), data);
    let dj = dot(data.col(j), &qj);
    let dk = dot(data.col(k), &qk);
    let floor = data.tolerances().collinearity_rel_tol * data.n() as f64;
    if dj <= floor || dk <= floor {
        None
    } else {
        Some(dot(&qj, &qk) / (dj.sqrt() * dk.sqrt()))
    }
}

/// Signal strengths psi_j = m_j (beta_j / sigma) plus the pieces they are
/// built from.
#[derive(Debug, Clone)]
pub struct SignalStrength {
    pub psi: Vec<f64>,
    /// Signal multipliers m_j.
    pub multipliers: Vec<f64>,
    /// Base signals beta_j / sigma.
    pub base: Vec<f64>,
}

pub fn signal_strength(
    data: &Dataset,
    true_support: &IndexSet,
    beta: &[f64],
    sigma: f64,
) -> SignalStrength {
    assert!(sigma > 0.0, "sigma must be positive");
    let ideal = ideal_fit(data, true_support);
    let base: Vec<f64> = beta.iter().map(|&b| b / sigma).collect();
    let psi = ideal.m.iter().zip(base.iter()).map(|(&m, &b)| m * b).collect();
    SignalStrength { psi, multipliers: ideal.m, base }
}

/// Stickiness between two predictors: the root mean squared difference of
/// their ideal z-scores, split into its signal and residual-correlation
/// parts.
#[derive(Debug, Clone, Copy)]
pub struct Stickiness {
    pub value: f64,
    pub z_cov: f64,
    pub psi_j: f64,
    pub psi_k: f64,
}

/// s_jk^2 = (psi_j - psi_k)^2 + 2 (1 - Cov(z_j, z_k)). `None` when either
/// signal multiplier vanishes.
pub fn stickiness(
    j: usize,
    k: usize,
    data: &Dataset,
    true_support: &IndexSet,
    beta: &[f64],
    sigma: f64,
) -> Option<Stickiness> {
    let z_cov = ideal_z_covariance(j, k, data, true_support)?;
    let strength = signal_strength(data, true_support, beta, sigma);
    let (psi_j, psi_k) = (strength.psi[j], strength.psi[k]);
    let s2 = (psi_j - psi_k).powi(2) + 2.0 * (1.0 - z_cov);
    Some(Stickiness { value: s2.max(0.0).sqrt(), z_cov, psi_j, psi_k })
}
