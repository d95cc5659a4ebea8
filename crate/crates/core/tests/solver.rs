//! Solver correctness against independent references: closed forms on
//! orthogonal designs, a proximal-gradient oracle for the Lasso, KKT
//! certificates, and the cross-validation contracts.

use rand::Rng;
use rand_distr::StandardNormal;

use spidr_core::data::Dataset;
use spidr_core::linalg::{axpy, dot, Matrix};
use spidr_core::penalty::{penalty_value, univariate_minimizer, PenaltyFamily, PenaltySpec};
use spidr_core::seed::seeded_rng;
use spidr_core::solver::{
    cross_validate, kkt_check, solve_at_lambda, solve_path, LambdaGrid,
};
use spidr_core::Tolerances;

fn random_standardized(n: usize, p: usize, seed: u64, beta: &[f64], sigma: f64) -> Dataset {
    let mut rng = seeded_rng(seed);
    let cols: Vec<Vec<f64>> =
        (0..p).map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let mut y = vec![0.0; n];
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            axpy(b, &cols[j], &mut y);
        }
    }
    for v in y.iter_mut() {
        let e: f64 = rng.sample(StandardNormal);
        *v += sigma * e;
    }
    Dataset::new(y, Matrix::from_columns(&cols).unwrap())
        .unwrap()
        .standardize()
        .unwrap()
}

/// Proximal-gradient (ISTA) reference for the Lasso objective; slow but
/// independent of the coordinate descent path.
fn ista_lasso(y: &[f64], x: &Matrix, lambda: f64, iters: usize) -> Vec<f64> {
    let n = y.len();
    let p = x.n_cols();
    let nf = n as f64;
    // Lipschitz constant of the smooth part via power iteration on X'X/n.
    let mut v = vec![1.0_f64; p];
    let mut lip = 1.0;
    for _ in 0..200 {
        let mut xv = vec![0.0; n];
        for j in 0..p {
            axpy(v[j], x.col(j), &mut xv);
        }
        let mut w = vec![0.0; p];
        for j in 0..p {
            w[j] = dot(x.col(j), &xv) / nf;
        }
        lip = dot(&w, &w).sqrt().max(1e-12);
        for j in 0..p {
            v[j] = w[j] / lip;
        }
    }
    let step = 1.0 / (lip * 1.01);

    let mut beta = vec![0.0_f64; p];
    for _ in 0..iters {
        let mut residual = y.to_vec();
        for j in 0..p {
            if beta[j] != 0.0 {
                axpy(-beta[j], x.col(j), &mut residual);
            }
        }
        for j in 0..p {
            let grad = -dot(x.col(j), &residual) / nf;
            let raw = beta[j] - step * grad;
            let thresh = step * lambda;
            beta[j] = raw.signum() * (raw.abs() - thresh).max(0.0);
        }
    }
    beta
}

fn objective(y: &[f64], x: &Matrix, beta: &[f64], spec: &PenaltySpec) -> f64 {
    let mut residual = y.to_vec();
    for j in 0..x.n_cols() {
        if beta[j] != 0.0 {
            axpy(-beta[j], x.col(j), &mut residual);
        }
    }
    let mut pen = 0.0;
    for &b in beta {
        pen += penalty_value(b, spec);
    }
    0.5 * dot(&residual, &residual) / y.len() as f64 + pen
}

#[test]
fn lambda_max_gives_zero_solution() {
    let data = random_standardized(40, 12, 1, &[2.0, -1.0], 1.0);
    let grid = LambdaGrid::from_data(&data, 50, None).unwrap();
    let tol = Tolerances::default();
    for family in [PenaltyFamily::Mcp, PenaltyFamily::Lasso] {
        let spec = PenaltySpec::new(family, grid.lambda_max(), 6.0).unwrap();
        let fit = solve_at_lambda(&data, &spec, None, None, &tol).unwrap();
        assert!(fit.beta.iter().all(|&b| b == 0.0), "{family}: nonzero at lambda_max");
        assert!(fit.converged);

        let spec = spec.with_lambda(grid.lambda_max() * 1.5);
        let fit = solve_at_lambda(&data, &spec, None, None, &tol).unwrap();
        assert!(fit.beta.iter().all(|&b| b == 0.0));
    }
}

#[test]
fn grid_shape_and_endpoints() {
    let data = random_standardized(30, 10, 2, &[1.5], 0.5);
    let grid = LambdaGrid::from_data(&data, 100, None).unwrap();
    assert_eq!(grid.len(), 100);
    assert!(grid.values().windows(2).all(|w| w[0] > w[1]));
    let n = data.n() as f64;
    let expect_max = (0..data.p())
        .map(|j| dot(data.col(j), data.y()).abs() / n)
        .fold(0.0_f64, f64::max);
    assert!((grid.lambda_max() - expect_max).abs() < 1e-12 * expect_max);
    // p < n default ratio.
    let last = grid.values()[99];
    assert!((last - 0.001 * expect_max).abs() < 1e-9 * expect_max);

    // p > n switches to 0.05.
    let wide = random_standardized(20, 40, 3, &[1.0], 0.5);
    let grid = LambdaGrid::from_data(&wide, 10, None).unwrap();
    assert!((grid.min_ratio() - 0.05).abs() < 1e-15);

    assert!(LambdaGrid::new(vec![1.0, 1.0]).is_err());
    assert!(LambdaGrid::new(vec![0.5, 1.0]).is_err());
    assert!(LambdaGrid::new(vec![1.0, 0.5]).is_ok());
}

/// On an exactly orthogonal design (X'X = nI) the solution decouples into
/// per-coordinate univariate problems.
#[test]
fn orthogonal_design_matches_univariate_closed_form() {
    // Hadamard-style orthogonal columns on n = 8.
    let n = 8;
    let base: [[f64; 8]; 4] = [
        [1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0],
        [1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0],
        [1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0],
        [1.0, -1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0],
    ];
    let cols: Vec<Vec<f64>> = base.iter().map(|c| c.to_vec()).collect();
    let mut rng = seeded_rng(4);
    let y: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) * 2.0).collect();
    let x = Matrix::from_columns(&cols).unwrap();
    let skip = vec![false; 4];
    let tol = Tolerances::default();

    for &(family, gamma) in &[(PenaltyFamily::Mcp, 3.0), (PenaltyFamily::Mcp, 6.0), (PenaltyFamily::Lasso, f64::INFINITY)]
    {
        for &lambda in &[0.05, 0.3, 0.8] {
            let spec = PenaltySpec::new(family, lambda, gamma).unwrap();
            let fit = spidr_core::solver::solve_penalized(&y, &x, &skip, &spec, None, &tol);
            for j in 0..4 {
                let z = dot(&cols[j], &y) / n as f64;
                let expect = univariate_minimizer(z, 1.0, &spec).unwrap();
                assert!(
                    (fit.beta[j] - expect).abs() < 1e-8,
                    "{family} lambda={lambda} j={j}: {} vs {expect}",
                    fit.beta[j]
                );
            }
        }
    }
}

#[test]
fn lasso_objective_matches_proximal_gradient_oracle() {
    let data = random_standardized(30, 8, 7, &[1.2, 0.0, -0.7, 0.0, 0.4], 0.8);
    let tol = Tolerances::default();
    for &lambda in &[0.05, 0.2, 0.5] {
        let spec = PenaltySpec::lasso(lambda).unwrap();
        let fit = solve_at_lambda(&data, &spec, None, None, &tol).unwrap();
        let reference = ista_lasso(data.y(), data.x_matrix(), lambda, 60_000);
        let f_cd = objective(data.y(), data.x_matrix(), &fit.beta, &spec);
        let f_ref = objective(data.y(), data.x_matrix(), &reference, &spec);
        assert!(
            (f_cd - f_ref).abs() < 1e-6,
            "lambda={lambda}: cd {f_cd} vs ista {f_ref}"
        );
        // CD should never be worse than the oracle beyond tolerance.
        assert!(f_cd <= f_ref + 1e-8);
    }
}

#[test]
fn kkt_certificates_hold_on_random_instances() {
    let tol = Tolerances::default();
    for seed in 0..20 {
        let p = 6 + (seed as usize % 10);
        let beta: Vec<f64> = (0..3).map(|k| 1.0 - 0.3 * k as f64).collect();
        let data = random_standardized(25 + (seed as usize % 15), p, 100 + seed, &beta, 1.0);
        let grid = LambdaGrid::from_data(&data, 20, None).unwrap();
        for family in [PenaltyFamily::Mcp, PenaltyFamily::Lasso] {
            let lambda = grid.values()[10];
            let spec = PenaltySpec::new(family, lambda, 6.0).unwrap();
            let fit = solve_at_lambda(&data, &spec, None, None, &tol).unwrap();
            assert!(fit.converged);
            assert_eq!(fit.monotone_violations, 0);
            let report = kkt_check(data.y(), data.x_matrix(), data.excluded(), &fit.beta, &spec);
            assert!(
                report.passes(tol.kkt_tol),
                "seed {seed} {family}: active {} inactive {}",
                report.max_active_violation,
                report.max_inactive_excess
            );
        }
    }
}

#[test]
fn mcp_with_huge_gamma_reproduces_lasso_path() {
    let data = random_standardized(40, 15, 9, &[1.5, -1.0, 0.8], 1.0);
    let grid = LambdaGrid::from_data(&data, 30, None).unwrap();
    let tol = Tolerances::default();
    let mcp = solve_path(&data, PenaltyFamily::Mcp, 1e6, &grid, &tol).unwrap();
    let lasso = solve_path(&data, PenaltyFamily::Lasso, f64::INFINITY, &grid, &tol).unwrap();
    for l in 0..grid.len() {
        for j in 0..data.p() {
            assert!(
                (mcp.betas[l][j] - lasso.betas[l][j]).abs() < 1e-5,
                "lambda index {l}, j {j}"
            );
        }
    }
}

#[test]
fn warm_path_matches_cold_solves_on_convex_instances() {
    let data = random_standardized(50, 10, 13, &[2.0, -1.5, 1.0], 1.0);
    let grid = LambdaGrid::from_data(&data, 25, None).unwrap();
    let tol = Tolerances::default();
    let path = solve_path(&data, PenaltyFamily::Lasso, f64::INFINITY, &grid, &tol).unwrap();
    for (l, &lambda) in grid.values().iter().enumerate() {
        let spec = PenaltySpec::lasso(lambda).unwrap();
        let cold = solve_at_lambda(&data, &spec, None, None, &tol).unwrap();
        let f_warm = objective(data.y(), data.x_matrix(), &path.betas[l], &spec);
        let f_cold = objective(data.y(), data.x_matrix(), &cold.beta, &spec);
        assert!(
            (f_warm - f_cold).abs() < 1e-8 * f_cold.max(1.0),
            "lambda index {l}: {f_warm} vs {f_cold}"
        );
    }
}

#[test]
fn lasso_path_moves_continuously() {
    let data = random_standardized(40, 12, 17, &[1.0, -0.8], 0.7);
    // Dense grid so adjacent solutions stay close.
    let grid = LambdaGrid::from_data(&data, 200, Some(0.01)).unwrap();
    let tol = Tolerances::default();
    let path = solve_path(&data, PenaltyFamily::Lasso, f64::INFINITY, &grid, &tol).unwrap();
    let p = data.p() as f64;
    for l in 1..grid.len() {
        let dl = grid.values()[l - 1] - grid.values()[l];
        let max_jump = (0..data.p())
            .map(|j| (path.betas[l][j] - path.betas[l - 1][j]).abs())
            .fold(0.0_f64, f64::max);
        assert!(
            max_jump <= 10.0 * p * dl + 1e-9,
            "jump {max_jump} exceeds bound {} at index {l}",
            10.0 * p * dl
        );
    }
}

#[test]
fn path_points_satisfy_kkt_for_mcp() {
    // Active sets need not grow monotonically for MCP; the per-point KKT
    // certificate is the contract instead.
    let data = random_standardized(35, 20, 23, &[1.4, 1.1, -0.9], 1.2);
    let grid = LambdaGrid::from_data(&data, 40, None).unwrap();
    let tol = Tolerances::default();
    let path = solve_path(&data, PenaltyFamily::Mcp, 6.0, &grid, &tol).unwrap();
    for (l, &lambda) in grid.values().iter().enumerate() {
        let spec = PenaltySpec::mcp(lambda, 6.0).unwrap();
        let report = kkt_check(data.y(), data.x_matrix(), data.excluded(), &path.betas[l], &spec);
        assert!(report.passes(tol.kkt_tol), "index {l}");
    }
}

#[test]
fn cross_validation_is_deterministic() {
    let data = random_standardized(40, 12, 29, &[1.2, -0.9], 1.0);
    let grid = LambdaGrid::from_data(&data, 30, None).unwrap();
    let tol = Tolerances::default();
    let a = cross_validate(&data, PenaltyFamily::Mcp, 6.0, &grid, 5, 42, &tol).unwrap();
    let b = cross_validate(&data, PenaltyFamily::Mcp, 6.0, &grid, 5, 42, &tol).unwrap();
    assert_eq!(a.lambda_hat_index, b.lambda_hat_index);
    assert_eq!(a.cv_mean, b.cv_mean);
    assert_eq!(a.cv_se, b.cv_se);
    // Different seed shuffles folds differently.
    let c = cross_validate(&data, PenaltyFamily::Mcp, 6.0, &grid, 5, 43, &tol).unwrap();
    assert_ne!(a.cv_mean, c.cv_mean);
    // lambda_hat attains the minimum.
    let min = a.cv_mean.iter().cloned().fold(f64::INFINITY, f64::min);
    assert_eq!(a.cv_mean[a.lambda_hat_index], min);
    assert!(a.cv_se.iter().all(|&s| s >= 0.0));
}

#[test]
fn cross_validation_rejects_tiny_folds() {
    let data = random_standardized(9, 4, 31, &[1.0], 0.5);
    let grid = LambdaGrid::from_data(&data, 10, None).unwrap();
    let tol = Tolerances::default();
    assert!(cross_validate(&data, PenaltyFamily::Mcp, 6.0, &grid, 5, 1, &tol).is_err());
    assert!(cross_validate(&data, PenaltyFamily::Mcp, 6.0, &grid, 1, 1, &tol).is_err());
    assert!(cross_validate(&data, PenaltyFamily::Mcp, 6.0, &grid, 4, 1, &tol).is_ok());
}

#[test]
fn pure_noise_selects_large_lambda() {
    // Under beta = 0 the CV curve should favor heavy penalization: the
    // chosen lambda lands in the largest-lambda third of the grid in at
    // least 80% of seeded replications.
    let tol = Tolerances::default();
    let mut hits = 0;
    let reps = 50;
    for seed in 0..reps {
        let data = random_standardized(36, 10, 1000 + seed, &[], 1.0);
        let grid = LambdaGrid::from_data(&data, 30, None).unwrap();
        let cv = cross_validate(&data, PenaltyFamily::Lasso, f64::INFINITY, &grid, 4, seed, &tol).unwrap();
        if cv.lambda_hat_index < grid.len() / 3 {
            hits += 1;
        }
    }
    assert!(hits >= (0.8 * reps as f64) as usize, "only {hits}/{reps} in the top third");
}

#[test]
fn strong_signal_cv_beats_null_model() {
    let data = random_standardized(60, 8, 37, &[2.5, -2.0, 1.5], 0.5);
    let grid = LambdaGrid::from_data(&data, 40, None).unwrap();
    let tol = Tolerances::default();
    let cv = cross_validate(&data, PenaltyFamily::Mcp, 6.0, &grid, 5, 7, &tol).unwrap();
    // cv error at the chosen lambda beats the all-zero model at lambda_max.
    assert!(cv.cv_mean[cv.lambda_hat_index] <= cv.cv_mean[0]);
    assert!(cv.lambda_hat_index > 0);
}

#[test]
fn max_sweep_cap_flags_nonconvergence() {
    let data = random_standardized(30, 10, 41, &[1.0, -1.0, 0.5], 1.0);
    let mut tol = Tolerances::default();
    tol.max_sweeps = 2;
    let spec = PenaltySpec::mcp(0.01, 6.0).unwrap();
    let fit = solve_at_lambda(&data, &spec, None, None, &tol).unwrap();
    assert!(!fit.converged);
    // Best iterate still returned.
    assert!(fit.beta.iter().any(|&b| b != 0.0));
}
