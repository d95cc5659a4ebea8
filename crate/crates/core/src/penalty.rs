//! Penalty functions and the exact univariate penalized least-squares
//! minimizer used by the coordinate descent solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyFamily {
    Mcp,
    Lasso,
}

impl std::fmt::Display for PenaltyFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PenaltyFamily::Mcp => write!(f, "mcp"),
            PenaltyFamily::Lasso => write!(f, "lasso"),
        }
    }
}

/// Penalty family with level `lambda` and (for MCP) concavity `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub family: PenaltyFamily,
    pub lambda: f64,
    pub gamma: f64,
}

impl PenaltySpec {
    pub fn new(family: PenaltyFamily, lambda: f64, gamma: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if family == PenaltyFamily::Mcp && !(gamma > 1.0) {
            return Err(Error::invalid(format!("mcp gamma must be > 1, got {gamma}")));
        }
        Ok(PenaltySpec { family, lambda, gamma })
    }

    pub fn mcp(lambda: f64, gamma: f64) -> Result<Self> {
        Self::new(PenaltyFamily::Mcp, lambda, gamma)
    }

    pub fn lasso(lambda: f64) -> Result<Self> {
        Self::new(PenaltyFamily::Lasso, lambda, f64::INFINITY)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }
}

/// rho(t; lambda, gamma). MCP in closed form:
/// lambda|t| - t^2/(2 gamma) while |t| <= gamma lambda, then flat at
/// gamma lambda^2 / 2. Lasso: lambda |t|.
pub fn penalty_value(t: f64, spec: &PenaltySpec) -> f64 {
    let a = t.abs();
    match spec.family {
        PenaltyFamily::Lasso => spec.lambda * a,
        PenaltyFamily::Mcp => {
            let cutoff = spec.gamma * spec.lambda;
            if a <= cutoff {
                spec.lambda * a - t * t / (2.0 * spec.gamma)
            } else {
                spec.gamma * spec.lambda * spec.lambda / 2.0
            }
        }
    }
}

/// Signed derivative of the penalty; 0 at t = 0 by convention (the
/// subgradient at zero is handled inside the solver, and active-set entries
/// are nonzero by construction).
pub fn penalty_derivative(t: f64, spec: &PenaltySpec) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let sign = t.signum();
    match spec.family {
        PenaltyFamily::Lasso => spec.lambda * sign,
        PenaltyFamily::Mcp => {
            let slope = spec.lambda * (1.0 - t.abs() / (spec.gamma * spec.lambda)).max(0.0);
            slope * sign
        }
    }
}

#[inline]
fn soft(z: f64, threshold: f64) -> f64 {
    z.signum() * (z.abs() - threshold).max(0.0)
}

/// argmin_b d b^2/2 - z b + rho(b; spec), with d > 0 the quadratic curvature
/// (||x_j||^2 / n, equal to 1 after standardization).
///
/// For MCP with d*gamma <= 1 the univariate problem is nonconvex; the global
/// minimizer is then found by comparing the objective at the stationary
/// candidates and 0, with ties resolved to 0.
pub fn univariate_minimizer(z: f64, d: f64, spec: &PenaltySpec) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::invalid(format!("curvature d must be positive, got {d}")));
    }
    let lambda = spec.lambda;
    match spec.family {
        PenaltyFamily::Lasso => Ok(soft(z, lambda) / d),
        PenaltyFamily::Mcp => {
            let gamma = spec.gamma;
            if d * gamma > 1.0 {
                // Firm-threshold closed form.
                if z.abs() <= d * gamma * lambda {
                    Ok(soft(z, lambda) / (d - 1.0 / gamma))
                } else {
                    Ok(z / d)
                }
            } else {
                // Nonconvex in b: the minimum is at 0, at the unpenalized
                // stationary point z/d (valid beyond the MCP knee), or at the
                // knee itself when d*gamma = 1 makes the inner piece linear.
                let objective = |b: f64| d * b * b / 2.0 - z * b + penalty_value(b, spec);
                let knee = gamma * lambda * z.signum();
                let mut best = 0.0;
                let mut best_val = 0.0;
                for cand in [knee, z / d] {
                    let val = objective(cand);
                    if val < best_val {
                        best = cand;
                        best_val = val;
                    }
                }
                Ok(best)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Adaptive Simpson quadrature of the MCP integrand, used as an
    /// implementation-independent oracle for the closed form.
    fn mcp_by_quadrature(t: f64, lambda: f64, gamma: f64) -> f64 {
        let f = |x: f64| lambda * (1.0 - x / (gamma * lambda)).max(0.0);
        let a = 0.0;
        let b = t.abs();
        let n = 200_000; // fine uniform Simpson grid; integrand is piecewise linear
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for k in 1..n {
            let x = a + k as f64 * h;
            acc += if k % 2 == 0 { 2.0 * f(x) } else { 4.0 * f(x) };
        }
        acc * h / 3.0
    }

    /// Golden-section refinement after a coarse grid scan; oracle for the
    /// univariate minimizer.
    fn minimize_by_search(z: f64, d: f64, spec: &PenaltySpec) -> f64 {
        let objective = |b: f64| d * b * b / 2.0 - z * b + penalty_value(b, spec);
        let span = (3.0 * z.abs() / d).max(1.0);
        let grid = 20_001;
        let mut best = 0.0;
        let mut best_val = objective(0.0);
        for k in 0..grid {
            let b = -span + 2.0 * span * k as f64 / (grid - 1) as f64;
            let v = objective(b);
            if v < best_val {
                best_val = v;
                best = b;
            }
        }
        // Golden-section around the best grid point.
        let (mut lo, mut hi) = (best - 2.0 * span / grid as f64, best + 2.0 * span / grid as f64);
        let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let m1 = hi - phi * (hi - lo);
            let m2 = lo + phi * (hi - lo);
            if objective(m1) <= objective(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let refined = 0.5 * (lo + hi);
        if objective(refined) < objective(best) {
            refined
        } else {
            best
        }
    }

    #[test]
    fn value_matches_quadrature_oracle() {
        let spec = PenaltySpec::mcp(1.0, 6.0).unwrap();
        let got = penalty_value(0.5, &spec);
        assert!((got - 0.479166666666667).abs() < 1e-12);
        assert!((got - mcp_by_quadrature(0.5, 1.0, 6.0)).abs() < 1e-9);

        // Saturated region: gamma lambda^2 / 2.
        let spec = PenaltySpec::mcp(1.0, 3.0).unwrap();
        assert_eq!(penalty_value(5.0, &spec), 1.5);
        assert!((penalty_value(5.0, &spec) - mcp_by_quadrature(5.0, 1.0, 3.0)).abs() < 1e-9);

        assert_eq!(penalty_value(0.0, &spec), 0.0);
        let lasso = PenaltySpec::lasso(0.7).unwrap();
        assert!((penalty_value(-2.0, &lasso) - 1.4).abs() < 1e-15);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let spec = PenaltySpec::mcp(1.0, 6.0).unwrap();
        assert!((penalty_derivative(0.5, &spec) - 0.9166666666667).abs() < 1e-10);
        assert!((penalty_derivative(-0.5, &spec) + 0.9166666666667).abs() < 1e-10);
        // Flat beyond gamma*lambda.
        assert_eq!(penalty_derivative(6.0, &spec), 0.0);
        assert_eq!(penalty_derivative(-7.5, &spec), 0.0);

        let h = 1e-6;
        let fd = (penalty_value(0.5 + h, &spec) - penalty_value(0.5 - h, &spec)) / (2.0 * h);
        assert!((penalty_derivative(0.5, &spec) - fd).abs() < 1e-4);
    }

    #[test]
    fn minimizer_known_points() {
        let spec = PenaltySpec::mcp(0.5, 3.0).unwrap();
        // |z| <= lambda kills the coordinate.
        assert_eq!(univariate_minimizer(0.3, 1.0, &spec).unwrap(), 0.0);
        // Firm threshold interior point.
        let got = univariate_minimizer(1.0, 1.0, &spec).unwrap();
        assert!((got - 0.75).abs() < 1e-12);
        assert!((got - minimize_by_search(1.0, 1.0, &spec)).abs() < 1e-7);
        // Unpenalized region.
        let got = univariate_minimizer(2.0, 1.0, &spec).unwrap();
        assert!((got - 2.0).abs() < 1e-12);
        assert!((got - minimize_by_search(2.0, 1.0, &spec)).abs() < 1e-7);

        assert!(univariate_minimizer(1.0, 0.0, &spec).is_err());
        assert!(univariate_minimizer(1.0, -2.0, &spec).is_err());
    }

    #[test]
    fn nonconvex_branch_matches_search_oracle() {
        // d*gamma <= 1 exercises the explicit objective comparison.
        let spec = PenaltySpec::mcp(0.8, 2.0).unwrap();
        for &d in &[0.1, 0.3, 0.5] {
            for &z in &[-2.0, -0.9, -0.3, 0.0, 0.2, 0.401, 1.1, 3.0] {
                let got = univariate_minimizer(z, d, &spec).unwrap();
                let oracle = minimize_by_search(z, d, &spec);
                let objective = |b: f64| d * b * b / 2.0 - z * b + penalty_value(b, &spec);
                assert!(
                    objective(got) <= objective(oracle) + 1e-8,
                    "z={z} d={d}: got {got} (f={}), oracle {oracle} (f={})",
                    objective(got),
                    objective(oracle)
                );
            }
        }
    }

    #[test]
    fn mcp_approaches_lasso_for_large_gamma() {
        let mcp = PenaltySpec::mcp(0.5, 1e6).unwrap();
        let lasso = PenaltySpec::lasso(0.5).unwrap();
        for &z in &[-3.0, -0.6, 0.2, 0.9, 4.0] {
            let a = univariate_minimizer(z, 1.0, &mcp).unwrap();
            let b = univariate_minimizer(z, 1.0, &lasso).unwrap();
            assert!((a - b).abs() <= 2e-6 * b.abs().max(1.0), "z={z}: {a} vs {b}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn penalty_is_even_monotone_concave_below_l1(
            t in -10.0_f64..10.0,
            lambda in 0.01_f64..3.0,
            gamma in 1.1_f64..8.0,
        ) {
            let spec = PenaltySpec::mcp(lambda, gamma).unwrap();
            let v = penalty_value(t, &spec);
            prop_assert!(v >= 0.0);
            prop_assert!((v - penalty_value(-t, &spec)).abs() < 1e-12);
            // Nondecreasing in |t| and dominated by the l1 penalty.
            prop_assert!(penalty_value(1.0001 * t, &spec) + 1e-12 >= v);
            prop_assert!(v <= lambda * t.abs() + 1e-12);
            // Concave on [0, inf): midpoint value above chord.
            let (a, b) = (0.25 * t.abs(), t.abs());
            let mid = penalty_value(0.5 * (a + b), &spec);
            let chord = 0.5 * (penalty_value(a, &spec) + penalty_value(b, &spec));
            prop_assert!(mid + 1e-12 >= chord);
        }

        #[test]
        fn derivative_matches_central_differences(
            t in -6.0_f64..6.0,
            lambda in 0.05_f64..2.5,
            gamma in 1.2_f64..9.0,
        ) {
            let spec = PenaltySpec::mcp(lambda, gamma).unwrap();
            // Exclude the kinks at 0 and gamma*lambda where the derivative jumps.
            prop_assume!(t.abs() > 1e-3);
            prop_assume!((t.abs() - gamma * lambda).abs() > 1e-3);
            let h = 1e-6;
            let fd = (penalty_value(t + h, &spec) - penalty_value(t - h, &spec)) / (2.0 * h);
            prop_assert!((penalty_derivative(t, &spec) - fd).abs() < 1e-5);
        }

        #[test]
        fn minimizer_is_globally_optimal(
            z in -8.0_f64..8.0,
            d in 0.05_f64..2.0,
            lambda in 0.01_f64..2.0,
            gamma in 1.1_f64..8.0,
        ) {
            let spec = PenaltySpec::mcp(lambda, gamma).unwrap();
            let b = univariate_minimizer(z, d, &spec).unwrap();
            let objective = |b: f64| d * b * b / 2.0 - z * b + penalty_value(b, &spec);
            let fb = objective(b);
            let span = (3.0 * z.abs() / d).max(1e-3);
            for k in 0..2000 {
                let cand = -span + 2.0 * span * k as f64 / 1999.0;
                prop_assert!(fb <= objective(cand) + 1e-10,
                    "b={b} f={fb} beaten at {cand} f={}", objective(cand));
            }
        }
    }
}
