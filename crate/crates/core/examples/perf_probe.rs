//! Quick timing probe for one benchmark replication.
use std::time::Instant;

use spidr_core::sim::{generate, run_replications, Method, RepOptions, SimDesign};
use spidr_core::solver::{cross_validate, LambdaGrid};
use spidr_core::{PenaltyFamily, Tolerances};

fn main() {
    let design = SimDesign::example1();
    let t0 = Instant::now();
    let sim = generate(&design, 1).unwrap();
    println!("generate: {:?}", t0.elapsed());

    let t0 = Instant::now();
    let std_data = sim.data.standardize().unwrap();
    println!("standardize: {:?}", t0.elapsed());

    let grid = LambdaGrid::from_data(&std_data, 100, None).unwrap();
    let tol = Tolerances::default();

    let t0 = Instant::now();
    let cv = cross_validate(&std_data, PenaltyFamily::Mcp, 6.0, &grid, 5, 1, &tol).unwrap();
    println!("cv (5 folds x 100 lambdas): {:?}  lambda_hat={} idx={}", t0.elapsed(), cv.lambda_hat, cv.lambda_hat_index);

    let t0 = Instant::now();
    let path = spidr_core::solver::solve_path(&std_data, PenaltyFamily::Mcp, 6.0, &grid, &tol).unwrap();
    println!("full path: {:?} (sweeps total {})", t0.elapsed(), path.sweeps.iter().sum::<usize>());

    let full_beta = path.betas[cv.lambda_hat_index].clone();
    println!("support at lambda_hat: {}", path.active_sets[cv.lambda_hat_index].len());

    let spec = spidr_core::PenaltySpec::mcp(cv.lambda_hat, 6.0).unwrap();
    let t0 = Instant::now();
    let mut fit = spidr_core::estimator::fit_all(&std_data, &spec, Some(&full_beta), &tol).unwrap();
    println!("fit_all (p=1000): {:?}", t0.elapsed());

    let t0 = Instant::now();
    let s2 = spidr_core::estimator::estimate_sigma2_with_support(
        &std_data, &full_beta, &spidr_core::estimator::Sigma2Options::default()).unwrap();
    println!("sigma2: {:?} -> {}", t0.elapsed(), s2.value);

    let t0 = Instant::now();
    spidr_core::estimator::attach_inference(&mut fit, &std_data, s2.value).unwrap();
    println!("attach_inference: {:?}", t0.elapsed());

    let a = spidr_core::fdr::estimate_dispersion_a(&fit.z);
    println!("dispersion A = {} (sigma0 {})", a.a, a.sigma0);
    let sel = spidr_core::fdr::select(&fit.z, &fit.se, &fit.beta, std_data.p(), 0.15, a.a).unwrap();
    println!("t_hat = {:?}, selected = {}", sel.t_hat, sel.selected.len());
    let errors = spidr_core::fdr::fmp(&sel.selected, &sim.support);
    println!("fdp = {:.3}, fmp = {:.3}", errors.fdp, errors.fmp);

    let t0 = Instant::now();
    let summary = run_replications(&design, 2, 7, &RepOptions {
        methods: vec![Method::Spidr],
        ..RepOptions::default()
    }).unwrap();
    println!("2 spidr replications: {:?}", t0.elapsed());
    for s in &summary.summaries {
        println!("  {:?}: nvs {:.2} fdr {:.3} fmr {:.3}", s.method, s.nvs_mean, s.fdr, s.fmr);
    }
}
