//! Direct FDR estimation from z-statistics, the correlation-corrected
//! estimate, threshold search, selection, and FDR-adjusted confidence
//! intervals.

use serde::Serialize;

use crate::data::IndexSet;
use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const SQRT_2PI: f64 = 2.5066282746310002;

/// Upper tail of the standard normal, Phi(-t).
pub fn normal_tail(t: f64) -> f64 {
    0.5 * libm::erfc(t / SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / SQRT_2PI
}

/// Correlation correction factor 1 + 2A t phi(t) / (sqrt(2) Phi(-t)).
pub fn efron_factor(t: f64, a: f64) -> f64 {
    let tail = normal_tail(t);
    if tail <= 0.0 {
        // Beyond double-precision tail range; the sign of A decides.
        return match a.partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Greater) => f64::INFINITY,
            Some(std::cmp::Ordering::Less) => f64::NEG_INFINITY,
            _ => 1.0,
        };
    }
    1.0 + 2.0 * a * t * normal_pdf(t) / (SQRT_2 * tail)
}

/// FDR estimates along the candidate thresholds (the sorted distinct |z|
/// values, decreasing). `r_of_t` uses the strict count #\{|z_j| > t\}; the
/// final selection applies >= at the chosen threshold.
#[derive(Debug, Clone, Serialize)]
pub struct FdrCurve {
    pub thresholds: Vec<f64>,
    pub r_of_t: Vec<usize>,
    /// 2 p Phi(-t).
    pub v_hat: Vec<f64>,
    /// V_hat / R, or 0 when R = 0 (uncapped).
    pub q0_hat: Vec<f64>,
    /// Correlation-corrected estimate, clamped to [0, 1] for reporting.
    pub q_hat: Vec<f64>,
    pub dispersion_a: f64,
}

fn sorted_abs_z(z: &[f64]) -> Vec<f64> {
    let mut abs: Vec<f64> = z.iter().filter(|v| v.is_finite()).map(|v| v.abs()).collect();
    abs.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    abs
}

/// Number of |z| values strictly greater than t (abs sorted ascending).
fn count_above(abs_sorted: &[f64], t: f64) -> usize {
    abs_sorted.len() - abs_sorted.partition_point(|&v| v <= t)
}

/// Number of |z| values greater than or equal to t.
fn count_at_or_above(abs_sorted: &[f64], t: f64) -> usize {
    abs_sorted.len() - abs_sorted.partition_point(|&v| v < t)
}

fn q0_at(abs_sorted: &[f64], p: usize, t: f64) -> (usize, f64, f64) {
    let r = count_above(abs_sorted, t);
    let v = 2.0 * p as f64 * normal_tail(t);
    let q0 = if r == 0 { 0.0 } else { v / r as f64 };
    (r, v, q0)
}

fn q_hat_uncapped(q0: f64, t: f64, a: f64) -> f64 {
    if q0 == 0.0 {
        0.0
    } else {
        q0 * efron_factor(t, a)
    }
}

/// Evaluates the direct and corrected FDR estimates at every distinct |z|.
pub fn fdr_curve(z: &[f64], p: usize, a: f64) -> FdrCurve {
    let abs_sorted = sorted_abs_z(z);
    let mut thresholds: Vec<f64> = abs_sorted.iter().cloned().filter(|&v| v > 0.0).collect();
    thresholds.dedup();
    thresholds.reverse();

    let mut curve = FdrCurve {
        r_of_t: Vec::with_capacity(thresholds.len()),
        v_hat: Vec::with_capacity(thresholds.len()),
        q0_hat: Vec::with_capacity(thresholds.len()),
        q_hat: Vec::with_capacity(thresholds.len()),
        thresholds,
        dispersion_a: a,
    };
    for &t in &curve.thresholds {
        let (r, v, q0) = q0_at(&abs_sorted, p, t);
        curve.r_of_t.push(r);
        curve.v_hat.push(v);
        curve.q0_hat.push(q0);
        curve.q_hat.push(q_hat_uncapped(q0, t, a).clamp(0.0, 1.0));
    }
    curve
}

/// Dispersion estimate for the correlation correction.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DispersionEstimate {
    pub a: f64,
    /// Central spread of the z ensemble (IQR / 1.349).
    pub sigma0: f64,
    /// Number of z-values inside the central window [-2, 2].
    pub n_central: usize,
    /// Too few central values (or a degenerate spread); A forced to 0.
    pub flagged: bool,
}

fn quantile_type7(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n as f64 - 1.0) * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Deterministic central-spread dispersion estimate: quartiles of the z
/// ensemble restricted into the central window [-2, 2] (values beyond the
/// window are clamped to its edge), sigma0 = IQR / 1.349, and
/// A = (sigma0^2 - 1) / sqrt(2), clamped to [-1/sqrt(2), 2].
pub fn estimate_dispersion_a(z: &[f64]) -> DispersionEstimate {
    let finite: Vec<f64> = z.iter().cloned().filter(|v| v.is_finite()).collect();
    let n_central = finite.iter().filter(|v| v.abs() <= 2.0).count();
    if n_central < 10 {
        return DispersionEstimate { a: 0.0, sigma0: 0.0, n_central, flagged: true };
    }
    let mut windowed: Vec<f64> = finite.iter().map(|v| v.clamp(-2.0, 2.0)).collect();
    windowed.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let iqr = quantile_type7(&windowed, 0.75) - quantile_type7(&windowed, 0.25);
    if iqr <= 1e-12 {
        return DispersionEstimate { a: 0.0, sigma0: 0.0, n_central, flagged: true };
    }
    let sigma0 = iqr / 1.349;
    let a = ((sigma0 * sigma0 - 1.0) / SQRT_2).clamp(-1.0 / SQRT_2, 2.0);
    DispersionEstimate { a, sigma0, n_central, flagged: false }
}

/// Threshold, selected set and FDR-adjusted confidence intervals at level q.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionResult {
    pub q: f64,
    /// None encodes the +infinity sentinel: no threshold achieved the level.
    pub t_hat: Option<f64>,
    pub selected: IndexSet,
    /// Interval endpoints aligned with `selected`: beta_j -+ t_hat * se_j.
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    /// Corrected estimate at the chosen threshold (capped for reporting).
    pub q_hat_at_t: f64,
    pub dispersion_a: f64,
}

/// Selects {j : |z_j| >= t_hat} where t_hat is the smallest candidate
/// threshold from which the corrected FDR estimate stays at or below q for
/// every larger threshold (a conservative rule: the curve need not be
/// monotone). Candidates are the distinct |z| values nudged a half-ulp each
/// way plus a dense fallback grid.
pub fn select(
    z: &[f64],
    se: &[f64],
    beta: &[f64],
    p: usize,
    q: f64,
    a: f64,
) -> Result<SelectionResult> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!("q must be in (0,1), got {q}")));
    }
    if z.len() != se.len() || z.len() != beta.len() {
        return Err(Error::invalid("z, se and beta must have equal length"));
    }
    let abs_sorted = sorted_abs_z(z);
    let empty = |a: f64| SelectionResult {
        q,
        t_hat: None,
        selected: IndexSet::empty(),
        ci_lower: Vec::new(),
        ci_upper: Vec::new(),
        q_hat_at_t: 0.0,
        dispersion_a: a,
    };
    let v_max = match abs_sorted.last() {
        Some(&v) if v > 0.0 => v,
        _ => return Ok(empty(a)),
    };

    let mut candidates: Vec<f64> = Vec::with_capacity(2 * abs_sorted.len() + 4096);
    for &v in &abs_sorted {
        if v > 0.0 {
            candidates.push(v.next_down());
            candidates.push(v.next_up());
        }
    }
    let grid_n = 4096;
    for k in 1..=grid_n {
        candidates.push(v_max * k as f64 / grid_n as f64);
    }
    candidates.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    candidates.dedup();

    // Scan from the largest candidate down, tracking the smallest threshold
    // from which every suffix candidate passes. Candidates that collide with
    // an observed |z| are skipped: there the strict count disagrees with the
    // >= selection the threshold would imply, and the half-ulp pair around
    // each |z| already covers both sides.
    let mut t_hat: Option<f64> = None;
    for &t in &candidates {
        let (r, _, q0) = q0_at(&abs_sorted, p, t);
        if count_at_or_above(&abs_sorted, t) != r {
            continue;
        }
        if q_hat_uncapped(q0, t, a) <= q {
            t_hat = Some(t);
        } else {
            break;
        }
    }

    let t = match t_hat {
        Some(t) if t <= v_max => t,
        _ => return Ok(empty(a)),
    };

    let mut selected = Vec::new();
    for (j, &zj) in z.iter().enumerate() {
        if zj.is_finite() && zj.abs() >= t {
            selected.push(j);
        }
    }
    if selected.is_empty() {
        return Ok(empty(a));
    }
    let ci_lower = selected.iter().map(|&j| beta[j] - t * se[j]).collect();
    let ci_upper = selected.iter().map(|&j| beta[j] + t * se[j]).collect();
    let (_, _, q0) = q0_at(&abs_sorted, p, t);
    Ok(SelectionResult {
        q,
        t_hat: Some(t),
        selected: IndexSet::from_unsorted(selected, z.len())?,
        ci_lower,
        ci_upper,
        q_hat_at_t: q_hat_uncapped(q0, t, a).clamp(0.0, 1.0),
        dispersion_a: a,
    })
}

/// Realized selection errors against a known truth (simulation only).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SelectionErrors {
    /// False discovery proportion: nulls among selected (0 if none selected).
    pub fdp: f64,
    /// False miss proportion: signals not selected over |S|.
    pub fmp: f64,
    /// The truth was empty; fmp defined as 0.
    pub truth_empty: bool,
}

pub fn fmp(selected: &IndexSet, true_support: &IndexSet) -> SelectionErrors {
    let true_picks = selected.intersection_len(true_support);
    let fdp = if selected.is_empty() {
        0.0
    } else {
        (selected.len() - true_picks) as f64 / selected.len() as f64
    };
    let (fmp, truth_empty) = if true_support.is_empty() {
        (0.0, true)
    } else {
        ((true_support.len() - true_picks) as f64 / true_support.len() as f64, false)
    };
    SelectionErrors { fdp, fmp, truth_empty }
}
