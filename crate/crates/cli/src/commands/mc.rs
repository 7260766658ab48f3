//! Monte Carlo study: simulate, select by cross-validation, refit, score.

use fpqr::fpqr::{fit, FpqrConfig};
use fpqr::metrics::{rmspe, rrispee, rrispee_surface};
use fpqr::modelsel::{grid_search_cv, GridSpec};
use fpqr::qcov::QcovMethod;
use fpqr::quantreg::QuantileLevel;
use fpqr::simulate::{generate, predictor_grid, response_grid, DgpOutput, DgpSpec, ErrorDist};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{csv_err, csv_writer, grid_spec, quantile_level};
use crate::args::McArgs;
use crate::error::{usage, CliError, CliResult};

#[derive(Debug, Clone)]
pub struct McOptions {
    pub n_list: Vec<usize>,
    pub error_dist: ErrorDist,
    pub predictor_noise: bool,
    pub tau_list: Vec<QuantileLevel>,
    pub reps: usize,
    pub seed: u64,
    pub methods: Vec<QcovMethod>,
    pub n_test: usize,
    /// Grid and folds; the fold seed is drawn per replication.
    pub grid: GridSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McRow {
    pub rep: usize,
    pub n: usize,
    pub tau: f64,
    pub method: QcovMethod,
    pub error_dist: ErrorDist,
    /// Selected `(K_Y, K_X, h)`.
    pub params: Option<(usize, usize, usize)>,
    pub rrispee_alpha: Option<f64>,
    pub rrispee_beta: Option<f64>,
    pub rmspe: Option<f64>,
    pub error: Option<String>,
}

pub const HEADER: [&str; 13] = [
    "rep",
    "n",
    "tau",
    "method",
    "error_dist",
    "k_y",
    "k_x",
    "h",
    "rrispee_alpha",
    "rrispee_beta",
    "rmspe",
    "failed",
    "message",
];

impl McRow {
    pub fn record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let (k_y, k_x, h) = match self.params {
            Some((a, b, c)) => (a.to_string(), b.to_string(), c.to_string()),
            None => Default::default(),
        };
        vec![
            self.rep.to_string(),
            self.n.to_string(),
            self.tau.to_string(),
            self.method.to_string(),
            self.error_dist.to_string(),
            k_y,
            k_x,
            h,
            opt(self.rrispee_alpha),
            opt(self.rrispee_beta),
            opt(self.rmspe),
            u8::from(self.error.is_some()).to_string(),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

struct Scores {
    params: (usize, usize, usize),
    alpha: f64,
    beta: f64,
    rmspe: f64,
}

fn score_cell(
    train: &DgpOutput,
    test: &DgpOutput,
    tau: QuantileLevel,
    method: QcovMethod,
    grid: &GridSpec,
) -> fpqr::Result<Scores> {
    let cv = grid_search_cv(&train.y, &train.x_noisy, tau, method, grid)?;
    let (k_y, k_x, h) = cv.best_params();
    let cfg = FpqrConfig { order_y: grid.order, order_x: grid.order, ..FpqrConfig::new(tau, h, method, k_y, k_x) };
    let f = fit(&train.y, &train.x_noisy, &cfg)?;
    let (v, u) = (predictor_grid(), response_grid());
    let beta_hat = f.coefficient_surface().evaluate(&v, &u)?;
    Ok(Scores {
        params: (k_y, k_x, h),
        alpha: rrispee(&u, &train.alpha_true, &f.intercept_function())?,
        beta: rrispee_surface(&v, &u, &train.beta_true, &beta_hat)?,
        rmspe: rmspe(&test.y, &f.predict(&test.x_noisy)?)?,
    })
}

fn run_rep(opts: &McOptions, rep: usize) -> Vec<McRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(rep as u64);
    // Outliers contaminate training data only.
    let test_dist = match opts.error_dist {
        ErrorDist::Contaminated { .. } => ErrorDist::Normal,
        d => d,
    };
    let mut rows = Vec::new();
    for &n in &opts.n_list {
        let (train_seed, test_seed, cv_seed): (u64, u64, u64) = (rng.random(), rng.random(), rng.random());
        let data = (|| {
            let train = generate(&DgpSpec {
                predictor_noise: opts.predictor_noise,
                ..DgpSpec::new(n, train_seed, opts.error_dist)
            })?;
            let test = generate(&DgpSpec {
                predictor_noise: opts.predictor_noise,
                ..DgpSpec::new(opts.n_test, test_seed, test_dist)
            })?;
            Ok::<_, fpqr::FpqrError>((train, test))
        })();
        let grid = GridSpec { seed: cv_seed, ..opts.grid.clone() };
        for &tau in &opts.tau_list {
            for &method in &opts.methods {
                let result = match &data {
                    Ok((train, test)) => score_cell(train, test, tau, method, &grid),
                    Err(e) => Err(e.clone()),
                };
                let base = McRow {
                    rep,
                    n,
                    tau: tau.value(),
                    method,
                    error_dist: opts.error_dist,
                    params: None,
                    rrispee_alpha: None,
                    rrispee_beta: None,
                    rmspe: None,
                    error: None,
                };
                rows.push(match result {
                    Ok(s) => McRow {
                        params: Some(s.params),
                        rrispee_alpha: Some(s.alpha),
                        rrispee_beta: Some(s.beta),
                        rmspe: Some(s.rmspe),
                        ..base
                    },
                    Err(e) => McRow { error: Some(e.to_string()), ..base },
                });
            }
        }
    }
    rows
}

/// Runs every replication (in parallel) and returns rows ordered by
/// replication, then `n`, `τ` and method. Each replication draws from its own
/// substream of `seed`, so the output does not depend on the worker count.
pub fn run_mc(opts: &McOptions) -> CliResult<Vec<McRow>> {
    if opts.reps == 0 {
        return usage("--reps must be at least 1");
    }
    if opts.n_list.is_empty() || opts.tau_list.is_empty() || opts.methods.is_empty() {
        return usage("--n-list, --tau-list and --qcov-list must be nonempty");
    }
    if opts.n_test == 0 {
        return usage("--n-test must be at least 1");
    }
    opts.error_dist.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let per_rep: Vec<Vec<McRow>> = (0..opts.reps).into_par_iter().map(|rep| run_rep(opts, rep)).collect();
    Ok(per_rep.into_iter().flatten().collect())
}

pub fn options(a: &McArgs) -> CliResult<McOptions> {
    Ok(McOptions {
        n_list: a.n_list.clone(),
        error_dist: a.errors.dist(),
        predictor_noise: !a.errors.no_predictor_noise,
        tau_list: a.tau_list.iter().map(|&t| quantile_level(t, "tau-list")).collect::<CliResult<_>>()?,
        reps: a.reps,
        seed: a.seed,
        methods: a.qcov_list.clone(),
        n_test: a.n_test,
        grid: grid_spec(&a.grid, 0),
    })
}

pub fn run(a: &McArgs) -> CliResult<()> {
    let rows = run_mc(&options(a)?)?;
    let mut w = csv_writer(&a.out)?;
    w.write_record(HEADER).map_err(csv_err(&a.out))?;
    for r in &rows {
        w.write_record(r.record()).map_err(csv_err(&a.out))?;
    }
    w.flush().map_err(|e| CliError::io(&a.out, e))?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    println!("{} rows ({failed} failed) written to {}", rows.len(), a.out.display());
    Ok(())
}
