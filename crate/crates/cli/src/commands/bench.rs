use std::time::Instant;

use fpqr::fpqr::{fit, FpqrConfig};
use fpqr::qcov::QcovMethod;
use fpqr::simulate::{generate, DgpSpec, ErrorDist};

use super::{csv_err, csv_writer, quantile_level};
use crate::args::BenchArgs;
use crate::error::{usage, CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: QcovMethod,
    pub n: usize,
    pub h: usize,
    pub k: usize,
    pub reps: usize,
    pub median_seconds: f64,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

/// Wall-clock time of full fits (smoothing, extraction, step-2 regression)
/// with `K_Y = K_X = k`, one row per (method, n, h). Runs sequentially so
/// timings are not disturbed by concurrent work.
pub fn run_bench(a: &BenchArgs) -> CliResult<Vec<BenchRow>> {
    if a.reps == 0 {
        return usage("--reps must be at least 1");
    }
    if a.n_list.is_empty() || a.h_list.is_empty() || a.qcov_list.is_empty() {
        return usage("--n-list, --h-list and --qcov-list must be nonempty");
    }
    let tau = quantile_level(a.tau, "tau")?;
    let mut out = Vec::new();
    for &method in &a.qcov_list {
        for &n in &a.n_list {
            for &h in &a.h_list {
                let cfg = FpqrConfig::new(tau, h, method, a.k, a.k);
                cfg.validate().map_err(|e| CliError::stage("bench", e))?;
                let mut times = Vec::with_capacity(a.reps);
                for rep in 0..a.reps {
                    let data = generate(&DgpSpec::new(n, a.seed.wrapping_add(rep as u64), ErrorDist::Normal))
                        .map_err(|e| CliError::stage("bench", e))?;
                    let start = Instant::now();
                    fit(&data.y, &data.x_noisy, &cfg)
                        .map_err(|e| CliError::stage(&format!("bench ({method}, n={n}, h={h})"), e))?;
                    times.push(start.elapsed().as_secs_f64());
                }
                out.push(BenchRow { method, n, h, k: a.k, reps: a.reps, median_seconds: median(&mut times) });
            }
        }
    }
    Ok(out)
}

pub fn run(a: &BenchArgs) -> CliResult<()> {
    let rows = run_bench(a)?;
    let mut w = csv_writer(&a.out)?;
    w.write_record(["method", "n", "h", "k", "reps", "median_seconds"])
        .map_err(csv_err(&a.out))?;
    for r in &rows {
        w.write_record([
            r.method.to_string(),
            r.n.to_string(),
            r.h.to_string(),
            r.k.to_string(),
            r.reps.to_string(),
            r.median_seconds.to_string(),
        ])
        .map_err(csv_err(&a.out))?;
    }
    w.flush().map_err(|e| CliError::io(&a.out, e))
}
