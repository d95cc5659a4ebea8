//! Seeded data generators for the benchmark designs, the replication engine,
//! and metric aggregation (NVS / FDR / FMR and per-variable selection
//! frequencies).

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, IndexSet};
use crate::error::{Error, Result};
use crate::estimator::{attach_inference, estimate_sigma2_with_support, fit_all, Sigma2Options};
use crate::fdr::{estimate_dispersion_a, fmp, select};
use crate::linalg::{axpy, KahanSum, Matrix};
use crate::penalty::{PenaltyFamily, PenaltySpec};
use crate::seed::{derive_seed, stream_rng, Domain};
use crate::solver::{cross_validate, path_on_design, LambdaGrid};
use crate::config::Tolerances;

/// The built-in simulation designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "lowercase")]
pub enum DesignName {
    PathDemo,
    Example1,
    Example2,
    Example3,
}

impl std::str::FromStr for DesignName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pathdemo" | "path-demo" | "path_demo" => Ok(DesignName::PathDemo),
            "example1" => Ok(DesignName::Example1),
            "example2" => Ok(DesignName::Example2),
            "example3" => Ok(DesignName::Example3),
            other => Err(Error::invalid(format!(
                "unknown design {other:?}; valid names: pathdemo, example1, example2, example3"
            ))),
        }
    }
}

impl std::fmt::Display for DesignName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DesignName::PathDemo => write!(f, "pathdemo"),
            DesignName::Example1 => write!(f, "example1"),
            DesignName::Example2 => write!(f, "example2"),
            DesignName::Example3 => write!(f, "example3"),
        }
    }
}

/// Parameters of one simulated design. The named constructors pin the
/// benchmark configurations; fields stay public for diagnostics at other
/// sizes.
#[derive(Debug, Clone, Serialize)]
pub struct SimDesign {
    pub name: DesignName,
    pub n: usize,
    pub p: usize,
    /// Coefficients on the signal positions (placed at 1..=len by default).
    pub signal_beta: Vec<f64>,
    pub sigma: f64,
    /// PathDemo factor loading on the signal blocks.
    pub a: f64,
    /// Block loadings for the factor designs.
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    /// Lag-one coefficient of the autoregressive design.
    pub ar_coeff: f64,
    /// Place the signal coefficients at random positions instead of 1..=s.
    pub randomize_support: bool,
}

impl SimDesign {
    /// Path illustration design: n=100, p=1000,
    /// beta = (3, 2, 1, -0.5, -1, -1.5, 0, ...), noise sd 2.5, and two
    /// overlapping factor blocks with loading `a`.
    pub fn path_demo(a: f64) -> Self {
        SimDesign {
            name: DesignName::PathDemo,
            n: 100,
            p: 1000,
            signal_beta: vec![3.0, 2.0, 1.0, -0.5, -1.0, -1.5],
            sigma: 2.5,
            a,
            a1: f64::NAN,
            a2: f64::NAN,
            a3: f64::NAN,
            ar_coeff: f64::NAN,
            randomize_support: false,
        }
    }

    fn block_beta() -> Vec<f64> {
        vec![
            1.0, 1.0, 1.0, 0.8, 0.8, 0.8, 0.6, 0.6, 0.6, -0.6, -0.6, -0.6, -0.8, -0.8, -0.8,
            -1.0, -1.0, -1.0,
        ]
    }

    /// Factor-block design: n=162, p=1000, 18 signals, sigma=3,
    /// loadings (1, 0.5, 0.1).
    pub fn example1() -> Self {
        SimDesign {
            name: DesignName::Example1,
            n: 162,
            p: 1000,
            signal_beta: Self::block_beta(),
            sigma: 3.0,
            a: f64::NAN,
            a1: 1.0,
            a2: 0.5,
            a3: 0.1,
            ar_coeff: f64::NAN,
            randomize_support: false,
        }
    }

    /// Same as example1 but with the stronger loading a1 = 2.
    pub fn example2() -> Self {
        SimDesign { name: DesignName::Example2, a1: 2.0, ..Self::example1() }
    }

    /// Same signals, but predictors from an AR(1) Gaussian with lag-one
    /// correlation 0.5.
    pub fn example3() -> Self {
        SimDesign {
            name: DesignName::Example3,
            ar_coeff: 0.5,
            a1: f64::NAN,
            a2: f64::NAN,
            a3: f64::NAN,
            ..Self::example1()
        }
    }

    pub fn by_name(name: DesignName) -> Self {
        match name {
            DesignName::PathDemo => Self::path_demo(1.0),
            DesignName::Example1 => Self::example1(),
            DesignName::Example2 => Self::example2(),
            DesignName::Example3 => Self::example3(),
        }
    }

    /// Override the sample size (diagnostics at other scales).
    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_randomized_support(mut self, randomize: bool) -> Self {
        self.randomize_support = randomize;
        self
    }
}

/// One generated dataset plus its ground truth.
#[derive(Debug, Clone)]
pub struct SimData {
    pub data: Dataset,
    /// Full-length coefficient vector on the raw scale.
    pub beta: Vec<f64>,
    pub support: IndexSet,
}

/// Draws one dataset. Deterministic per (design, seed); the draw order is
/// fixed: support placement, block membership, the z matrix column by
/// column, the shared factors, then the noise.
pub fn generate(design: &SimDesign, seed: u64) -> Result<SimData> {
    let mut rng = stream_rng(seed, Domain::Generate, 0);
    let n = design.n;
    let p = design.p;
    let s = design.signal_beta.len();
    if p < s {
        return Err(Error::invalid("p smaller than the number of signals"));
    }

    let signal_positions: Vec<usize> = if design.randomize_support {
        let mut picked = rand::seq::index::sample(&mut rng, p, s).into_vec();
        picked.sort_unstable();
        picked
    } else {
        (0..s).collect()
    };

    let mut beta = vec![0.0; p];
    for (value, &pos) in design.signal_beta.iter().zip(&signal_positions) {
        beta[pos] = *value;
    }

    // Block memberships for the factor designs.
    let (block_u1, block_u2, block_diff) = match design.name {
        DesignName::Example1 | DesignName::Example2 => {
            let loaded_a1: Vec<usize> = signal_positions[..9].to_vec();
            let loaded_a2: Vec<usize> = signal_positions[9..].to_vec();
            let pool: Vec<usize> = (0..p).filter(|j| !signal_positions.contains(j)).collect();
            let picked = rand::seq::index::sample(&mut rng, pool.len(), 150).into_vec();
            let a3: Vec<usize> = picked[..50].iter().map(|&i| pool[i]).collect();
            let a4: Vec<usize> = picked[50..100].iter().map(|&i| pool[i]).collect();
            let a5: Vec<usize> = picked[100..].iter().map(|&i| pool[i]).collect();
            (
                vec![(loaded_a1, design.a1), (a3, design.a2)],
                vec![(loaded_a2, design.a1), (a4, design.a2)],
                a5,
            )
        }
        DesignName::PathDemo => (
            vec![((0..4).collect(), design.a), ((8..17).collect(), 1.0)],
            vec![((4..8).collect(), design.a), ((17..26).collect(), 1.0)],
            Vec::new(),
        ),
        DesignName::Example3 => (Vec::new(), Vec::new(), Vec::new()),
    };

    let mut x = Matrix::zeros(n, p);
    for j in 0..p {
        let col = x.col_mut(j);
        for v in col.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
    }

    match design.name {
        DesignName::Example3 => {
            // x_1 = z_1, x_j = r x_{j-1} + sqrt(1 - r^2) z_j: exact AR(1)
            // with correlation r^{|j-k|}.
            let r = design.ar_coeff;
            let innovation = (1.0 - r * r).sqrt();
            for j in 1..p {
                for i in 0..n {
                    let prev = x.get(i, j - 1);
                    let col = x.col_mut(j);
                    col[i] = r * prev + innovation * col[i];
                }
            }
        }
        _ => {
            let u1: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let u2: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            for (members, loading) in &block_u1 {
                for &j in members {
                    axpy(*loading, &u1, x.col_mut(j));
                }
            }
            for (members, loading) in &block_u2 {
                for &j in members {
                    axpy(*loading, &u2, x.col_mut(j));
                }
            }
            for &j in &block_diff {
                axpy(design.a3, &u1, x.col_mut(j));
                axpy(-design.a3, &u2, x.col_mut(j));
            }
        }
    }

    let mut y = vec![0.0; n];
    for &j in &signal_positions {
        axpy(beta[j], x.col(j), &mut y);
    }
    for v in y.iter_mut() {
        let e: f64 = rng.sample(StandardNormal);
        *v += design.sigma * e;
    }

    let support = IndexSet::from_unsorted(signal_positions, p)?;
    Ok(SimData { data: Dataset::new(y, x)?, beta, support })
}

/// Selection methods compared by the replication engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lasso,
    Mcp,
    Spidr,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Lasso => write!(f, "lasso"),
            Method::Mcp => write!(f, "mcp"),
            Method::Spidr => write!(f, "spidr"),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lasso" => Ok(Method::Lasso),
            "mcp" => Ok(Method::Mcp),
            "spidr" => Ok(Method::Spidr),
            other => Err(Error::invalid(format!(
                "unknown method {other:?}; valid names: lasso, mcp, spidr"
            ))),
        }
    }
}

/// Tuning knobs of the replication engine.
#[derive(Debug, Clone)]
pub struct RepOptions {
    pub q: f64,
    pub methods: Vec<Method>,
    pub n_folds: usize,
    pub n_lambda: usize,
    pub lambda_min_ratio: Option<f64>,
    pub gamma: f64,
    pub sigma_repeats: usize,
    pub sigma2_override: Option<f64>,
    pub dispersion_override: Option<f64>,
    pub tolerances: Tolerances,
}

impl Default for RepOptions {
    fn default() -> Self {
        RepOptions {
            q: 0.15,
            methods: vec![Method::Lasso, Method::Mcp, Method::Spidr],
            n_folds: 5,
            n_lambda: 100,
            lambda_min_ratio: None,
            gamma: 6.0,
            sigma_repeats: 10,
            sigma2_override: None,
            dispersion_override: None,
            tolerances: Tolerances::default(),
        }
    }
}

/// Per-replication, per-method metrics.
#[derive(Debug, Clone, Serialize)]
pub struct RepRecord {
    pub rep: usize,
    pub method: Method,
    pub nvs: usize,
    pub fdp: f64,
    pub fmp: f64,
    pub lambda_hat: f64,
    pub sigma2_hat: Option<f64>,
    pub t_hat: Option<f64>,
}

/// Aggregate in the style of the NVS/FDR/FMR table: mean and standard
/// deviation per method.
#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub nvs_mean: f64,
    pub nvs_sd: f64,
    pub fdr: f64,
    pub fdr_sd: f64,
    pub fmr: f64,
    pub fmr_sd: f64,
}

/// All replication outputs: tidy records, per-method aggregates, and
/// per-variable selection frequencies.
#[derive(Debug, Clone, Serialize)]
pub struct RepSummary {
    pub design: DesignName,
    pub n_reps: usize,
    pub q: f64,
    pub seed: u64,
    pub failures: usize,
    pub records: Vec<RepRecord>,
    pub summaries: Vec<MethodSummary>,
    /// Fraction of successful replications selecting each variable.
    pub selection_freq: Vec<(Method, Vec<f64>)>,
}

struct RepOutcome {
    rep: usize,
    per_method: Vec<(Method, IndexSet, RepRecord)>,
}

fn selection_from_cv(
    std_data: &Dataset,
    family: PenaltyFamily,
    gamma: f64,
    grid: &LambdaGrid,
    opts: &RepOptions,
    fold_seed: u64,
) -> Result<(IndexSet, Vec<f64>, f64)> {
    let cv = cross_validate(std_data, family, gamma, grid, opts.n_folds, fold_seed, &opts.tolerances)?;
    let prefix = &grid.values()[..=cv.lambda_hat_index];
    let path = path_on_design(
        std_data.y(),
        std_data.x_matrix(),
        std_data.excluded(),
        family,
        gamma,
        prefix,
        &opts.tolerances,
    )?;
    let beta = path.betas.last().expect("non-empty path").clone();
    let selected = IndexSet::from_support(&beta);
    Ok((selected, beta, cv.lambda_hat))
}

fn run_one_rep(design: &SimDesign, seed: u64, rep: usize, opts: &RepOptions) -> Result<RepOutcome> {
    let sim = generate(design, derive_seed(seed, Domain::Generate, rep as u64))?;
    let std_data = sim.data.standardize()?;
    let grid = LambdaGrid::from_data(&std_data, opts.n_lambda, opts.lambda_min_ratio)?;
    let fold_seed = derive_seed(seed, Domain::Folds, rep as u64);

    let wants = |m: Method| opts.methods.contains(&m);
    let mut per_method = Vec::new();

    let mcp_fit = if wants(Method::Mcp) || wants(Method::Spidr) {
        Some(selection_from_cv(&std_data, PenaltyFamily::Mcp, opts.gamma, &grid, opts, fold_seed)?)
    } else {
        None
    };

    if wants(Method::Lasso) {
        let (selected, _, lambda_hat) =
            selection_from_cv(&std_data, PenaltyFamily::Lasso, f64::INFINITY, &grid, opts, fold_seed)?;
        let errors = fmp(&selected, &sim.support);
        per_method.push((
            Method::Lasso,
            selected.clone(),
            RepRecord {
                rep,
                method: Method::Lasso,
                nvs: selected.len(),
                fdp: errors.fdp,
                fmp: errors.fmp,
                lambda_hat,
                sigma2_hat: None,
                t_hat: None,
            },
        ));
    }

    if wants(Method::Mcp) {
        let (selected, _, lambda_hat) = mcp_fit.as_ref().expect("mcp fit computed").clone();
        let errors = fmp(&selected, &sim.support);
        per_method.push((
            Method::Mcp,
            selected.clone(),
            RepRecord {
                rep,
                method: Method::Mcp,
                nvs: selected.len(),
                fdp: errors.fdp,
                fmp: errors.fmp,
                lambda_hat,
                sigma2_hat: None,
                t_hat: None,
            },
        ));
    }

    if wants(Method::Spidr) {
        let (_, full_beta, lambda_hat) = mcp_fit.as_ref().expect("mcp fit computed").clone();
        let sigma2 = match opts.sigma2_override {
            Some(v) => v,
            None => {
                estimate_sigma2_with_support(
                    &std_data,
                    &full_beta,
                    &Sigma2Options {
                        n_repeats: opts.sigma_repeats,
                        seed: derive_seed(seed, Domain::SigmaSplit, rep as u64),
                        ..Sigma2Options::default()
                    },
                )?
                .value
            }
        };
        let spec = PenaltySpec::mcp(lambda_hat, opts.gamma)?;
        let mut fit = fit_all(&std_data, &spec, Some(&full_beta), &opts.tolerances)?;
        attach_inference(&mut fit, &std_data, sigma2)?;
        let a = match opts.dispersion_override {
            Some(v) => v,
            None => estimate_dispersion_a(&fit.z).a,
        };
        let selection = select(&fit.z, &fit.se, &fit.beta, std_data.p(), opts.q, a)?;
        let errors = fmp(&selection.selected, &sim.support);

        // Independent set-arithmetic recomputation of the error metrics.
        let naive_tp = selection.selected.iter().filter(|j| sim.support.contains(**j)).count();
        let naive_fdp = if selection.selected.is_empty() {
            0.0
        } else {
            (selection.selected.len() - naive_tp) as f64 / selection.selected.len() as f64
        };
        let naive_fmp = (sim.support.len() - naive_tp) as f64 / sim.support.len() as f64;
        debug_assert!((naive_fdp - errors.fdp).abs() < 1e-12);
        debug_assert!((naive_fmp - errors.fmp).abs() < 1e-12);

        per_method.push((
            Method::Spidr,
            selection.selected.clone(),
            RepRecord {
                rep,
                method: Method::Spidr,
                nvs: selection.selected.len(),
                fdp: errors.fdp,
                fmp: errors.fmp,
                lambda_hat,
                sigma2_hat: Some(sigma2),
                t_hat: selection.t_hat,
            },
        ));
    }

    Ok(RepOutcome { rep, per_method })
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut acc = KahanSum::default();
    for &v in values {
        acc.add(v);
    }
    let mean = acc.sum() / values.len() as f64;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let mut ss = KahanSum::default();
    for &v in values {
        ss.add((v - mean) * (v - mean));
    }
    (mean, (ss.sum() / (values.len() - 1) as f64).sqrt())
}

/// Runs seeded replications of a design and aggregates NVS/FDR/FMR per
/// method. Replications use independent substreams, so results do not depend
/// on thread count; failed replications are counted and excluded.
pub fn run_replications(
    design: &SimDesign,
    n_reps: usize,
    seed: u64,
    opts: &RepOptions,
) -> Result<RepSummary> {
    if n_reps == 0 {
        return Err(Error::invalid("need at least 1 replication"));
    }
    if opts.methods.is_empty() {
        return Err(Error::invalid("need at least one method"));
    }
    if !(opts.q > 0.0 && opts.q < 1.0) {
        return Err(Error::invalid(format!("q must be in (0,1), got {}", opts.q)));
    }

    let outcomes: Vec<Result<RepOutcome>> = (0..n_reps)
        .into_par_iter()
        .map(|rep| run_one_rep(design, seed, rep, opts))
        .collect();

    let mut failures = 0usize;
    let mut records = Vec::new();
    let mut freq: Vec<(Method, Vec<f64>)> =
        opts.methods.iter().map(|&m| (m, vec![0.0; design.p])).collect();
    let mut ok_count = 0usize;

    let mut ordered: Vec<RepOutcome> = Vec::with_capacity(n_reps);
    for outcome in outcomes {
        match outcome {
            Ok(o) => ordered.push(o),
            Err(_) => failures += 1,
        }
    }
    ordered.sort_by_key(|o| o.rep);

    for outcome in &ordered {
        ok_count += 1;
        for (method, selected, record) in &outcome.per_method {
            records.push(record.clone());
            if let Some((_, counts)) = freq.iter_mut().find(|(m, _)| m == method) {
                for &j in selected.iter() {
                    counts[j] += 1.0;
                }
            }
        }
    }
    for (_, counts) in freq.iter_mut() {
        for c in counts.iter_mut() {
            *c /= ok_count.max(1) as f64;
        }
    }

    let summaries = opts
        .methods
        .iter()
        .map(|&method| {
            let nvs: Vec<f64> = records
                .iter()
                .filter(|r| r.method == method)
                .map(|r| r.nvs as f64)
                .collect();
            let fdp: Vec<f64> =
                records.iter().filter(|r| r.method == method).map(|r| r.fdp).collect();
            let fmp_vals: Vec<f64> =
                records.iter().filter(|r| r.method == method).map(|r| r.fmp).collect();
            let (nvs_mean, nvs_sd) = mean_sd(&nvs);
            let (fdr, fdr_sd) = mean_sd(&fdp);
            let (fmr, fmr_sd) = mean_sd(&fmp_vals);
            MethodSummary { method, nvs_mean, nvs_sd, fdr, fdr_sd, fmr, fmr_sd }
        })
        .collect();

    Ok(RepSummary {
        design: design.name,
        n_reps,
        q: opts.q,
        seed,
        failures,
        records,
        summaries,
        selection_freq: freq,
    })
}
