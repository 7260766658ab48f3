//! Estimation and prediction accuracy measures on discrete grids.

use std::fmt;

use nalgebra::DMatrix;

use crate::basis::DiscreteCurveSet;
use crate::error::{invalid, FpqrError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricName {
    RrispeeAlpha,
    RrispeeBeta,
    Rmspe,
    Cpd,
    IntervalScore,
}

impl MetricName {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::RrispeeAlpha => "rrispee_alpha",
            MetricName::RrispeeBeta => "rrispee_beta",
            MetricName::Rmspe => "rmspe",
            MetricName::Cpd => "cpd",
            MetricName::IntervalScore => "interval_score",
        }
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub name: MetricName,
    pub value: f64,
    /// Number of grid points the metric was computed on.
    pub grid_points: usize,
}

/// Trapezoidal integral of `values` sampled at `grid`.
pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(g, v)| 0.5 * (g[1] - g[0]) * (v[0] + v[1]))
        .sum()
}

fn check_grid(grid: &[f64], len: usize, what: &str) -> Result<()> {
    if grid.len() != len {
        return invalid(format!("{what}: grid has {} points, values have {len}", grid.len()));
    }
    if grid.len() < 2 {
        return invalid(format!("{what}: need at least two grid points"));
    }
    Ok(())
}

fn percentage_ratio(err_sq: f64, true_sq: f64, what: &str) -> Result<f64> {
    if !(true_sq > 0.0) {
        return Err(FpqrError::UndefinedMetric(format!("{what}: true function has zero norm")));
    }
    Ok(100.0 * (err_sq / true_sq).sqrt())
}

/// `100 √(‖θ − θ̂‖² / ‖θ‖²)` for functions of one variable.
pub fn rrispee(grid: &[f64], truth: &[f64], est: &[f64]) -> Result<f64> {
    check_grid(grid, truth.len(), "rrispee")?;
    if est.len() != truth.len() {
        return invalid("rrispee: estimate and truth differ in length");
    }
    let diff: Vec<f64> = truth.iter().zip(est).map(|(t, e)| (t - e) * (t - e)).collect();
    let sq: Vec<f64> = truth.iter().map(|t| t * t).collect();
    percentage_ratio(trapezoid(grid, &diff), trapezoid(grid, &sq), "rrispee")
}

fn surface_sq_norm(v_grid: &[f64], u_grid: &[f64], m: &DMatrix<f64>) -> f64 {
    let inner: Vec<f64> = (0..v_grid.len())
        .map(|r| {
            let row: Vec<f64> = m.row(r).iter().map(|x| x * x).collect();
            trapezoid(u_grid, &row)
        })
        .collect();
    trapezoid(v_grid, &inner)
}

/// [`rrispee`] for surfaces sampled on `v_grid x u_grid` (rows follow `v`).
pub fn rrispee_surface(v_grid: &[f64], u_grid: &[f64], truth: &DMatrix<f64>, est: &DMatrix<f64>) -> Result<f64> {
    check_grid(v_grid, truth.nrows(), "rrispee (rows)")?;
    check_grid(u_grid, truth.ncols(), "rrispee (columns)")?;
    if est.shape() != truth.shape() {
        return invalid("rrispee: estimate and truth differ in shape");
    }
    let diff = truth - est;
    percentage_ratio(
        surface_sq_norm(v_grid, u_grid, &diff),
        surface_sq_norm(v_grid, u_grid, truth),
        "rrispee",
    )
}

fn check_pair(y: &DiscreteCurveSet, q: &DiscreteCurveSet) -> Result<()> {
    if y.values().shape() != q.values().shape() {
        return invalid(format!(
            "observed curves are {:?} but predictions are {:?}",
            y.values().shape(),
            q.values().shape()
        ));
    }
    if !y.same_grid(q.grid()) {
        return invalid("observed and predicted curves use different grids");
    }
    Ok(())
}

fn row_sq_norms(grid: &[f64], m: &DMatrix<f64>) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| {
            let sq: Vec<f64> = m.row(i).iter().map(|x| x * x).collect();
            trapezoid(grid, &sq)
        })
        .collect()
}

/// Pooled `100 √(Σ‖𝒴ᵢ − Q̂ᵢ‖² / Σ‖𝒴ᵢ‖²)` over all curves.
pub fn rmspe(y_true: &DiscreteCurveSet, q_hat: &DiscreteCurveSet) -> Result<f64> {
    check_pair(y_true, q_hat)?;
    let grid = y_true.grid();
    let err: f64 = row_sq_norms(grid, &(y_true.values() - q_hat.values())).iter().sum();
    let tot: f64 = row_sq_norms(grid, y_true.values()).iter().sum();
    percentage_ratio(err, tot, "rmspe")
}

/// RMSPE of each curve separately.
pub fn rmspe_per_curve(y_true: &DiscreteCurveSet, q_hat: &DiscreteCurveSet) -> Result<Vec<f64>> {
    check_pair(y_true, q_hat)?;
    let grid = y_true.grid();
    let err = row_sq_norms(grid, &(y_true.values() - q_hat.values()));
    let tot = row_sq_norms(grid, y_true.values());
    err.iter().zip(&tot).map(|(e, t)| percentage_ratio(*e, *t, "rmspe")).collect()
}

fn check_lengths(y: &[f64], lo: &[f64], hi: &[f64]) -> Result<()> {
    if y.len() != lo.len() || y.len() != hi.len() {
        return invalid("observation and bound lengths differ");
    }
    if y.is_empty() {
        return invalid("empty curve");
    }
    Ok(())
}

/// Nominal level minus the fraction of points with `lo <= y <= hi`.
pub fn cpd(y: &[f64], lo: &[f64], hi: &[f64], nominal: f64) -> Result<f64> {
    check_lengths(y, lo, hi)?;
    if !(nominal > 0.0 && nominal < 1.0) {
        return invalid(format!("nominal coverage {nominal} outside (0, 1)"));
    }
    let covered = (0..y.len()).filter(|&j| lo[j] <= y[j] && y[j] <= hi[j]).count();
    Ok(nominal - covered as f64 / y.len() as f64)
}

/// Mean interval score: width plus `2/level` times the distance of each
/// observation outside the interval.
pub fn interval_score(y: &[f64], lo: &[f64], hi: &[f64], level: f64) -> Result<f64> {
    check_lengths(y, lo, hi)?;
    if !(level > 0.0 && level < 1.0) {
        return invalid(format!("interval level {level} outside (0, 1)"));
    }
    if let Some(j) = (0..y.len()).find(|&j| lo[j] > hi[j]) {
        return invalid(format!("interval bounds cross at index {j}"));
    }
    let pen = 2.0 / level;
    let total: f64 = (0..y.len())
        .map(|j| {
            let mut s = hi[j] - lo[j];
            if y[j] < lo[j] {
                s += pen * (lo[j] - y[j]);
            }
            if y[j] > hi[j] {
                s += pen * (y[j] - hi[j]);
            }
            s
        })
        .sum();
    Ok(total / y.len() as f64)
}
