//! Cross-validated grid search over `(K_Y, K_X, h)` scored by a check-loss BIC.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{center_columns, curves_from_half_coords, DiscreteCurveSet, DEFAULT_ORDER};
use crate::error::{invalid, FpqrError, Result};
use crate::fpqr::{check_sizes, extract_up_to, finish_fit, side, FpqrConfig, FpqrFit, Side};
use crate::metrics::trapezoid;
use crate::qcov::{qcov, QcovMethod};
use crate::quantreg::{check_loss, QuantileLevel};

/// Lower bound applied to the loss norm before taking its logarithm.
pub const BIC_NORM_FLOOR: f64 = 1e-300;

/// Sample size used in the `ω ln n` penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltySize {
    /// Size of the held-out set being scored.
    #[default]
    TestSet,
    /// Total number of curves in the search.
    Total,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub k_y_grid: Vec<usize>,
    pub k_x_grid: Vec<usize>,
    pub h_grid: Vec<usize>,
    pub folds: usize,
    pub seed: u64,
    pub penalty: PenaltySize,
    pub order: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            k_y_grid: vec![4, 5, 8, 10, 20],
            k_x_grid: vec![4, 5, 8, 10, 20],
            h_grid: vec![1, 2, 3, 4, 5],
            folds: 5,
            seed: 0,
            penalty: PenaltySize::TestSet,
            order: DEFAULT_ORDER,
        }
    }
}

impl GridSpec {
    pub fn n_cells(&self) -> usize {
        self.k_y_grid.len() * self.k_x_grid.len() * self.h_grid.len()
    }

    fn validate(&self) -> Result<()> {
        if self.k_y_grid.is_empty() || self.k_x_grid.is_empty() || self.h_grid.is_empty() {
            return invalid("grid search needs nonempty K_Y, K_X and h grids");
        }
        if self.h_grid.contains(&0) {
            return invalid("h grid contains 0");
        }
        if self.folds < 2 {
            return invalid("cross-validation needs at least 2 folds");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvCell {
    pub k_y: usize,
    pub k_x: usize,
    pub h: usize,
    /// Mean held-out BIC; `+∞` when any fold could not be fitted.
    pub mean_bic: f64,
    pub fold_bics: Vec<f64>,
    /// First failure seen for this cell.
    pub error: Option<String>,
}

impl CvCell {
    pub fn omega(&self) -> usize {
        self.k_y + self.k_x + self.h
    }

    pub fn is_feasible(&self) -> bool {
        self.mean_bic.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    /// One entry per cell, ordered by `K_Y`, then `K_X`, then `h` as listed in the grid.
    pub cells: Vec<CvCell>,
    /// Index into `cells` of the selected model.
    pub best: usize,
    pub fold_sizes: Vec<usize>,
}

impl CvResult {
    pub fn best_cell(&self) -> &CvCell {
        &self.cells[self.best]
    }

    /// `(K_Y, K_X, h)` of the selected model.
    pub fn best_params(&self) -> (usize, usize, usize) {
        let c = self.best_cell();
        (c.k_y, c.k_x, c.h)
    }
}

/// `ln ‖Σᵢ ρ_τ(𝒴ᵢ − Q̂ᵢ)‖ + ω ln n` with `n` the number of test curves.
pub fn bic(fit: &FpqrFit, y_test: &DiscreteCurveSet, x_test: &DiscreteCurveSet) -> Result<f64> {
    bic_with_penalty(fit, y_test, x_test, y_test.n_curves())
}

/// [`bic`] with an explicit sample size in the penalty.
pub fn bic_with_penalty(
    fit: &FpqrFit,
    y_test: &DiscreteCurveSet,
    x_test: &DiscreteCurveSet,
    penalty_n: usize,
) -> Result<f64> {
    if y_test.n_curves() != x_test.n_curves() {
        return invalid("test response and predictor sets differ in size");
    }
    if !y_test.same_grid(&fit.y_grid) {
        return invalid("test response grid differs from the training grid");
    }
    let pred = fit.predict(x_test)?;
    Ok(bic_from_values(fit, y_test.values(), pred.values(), penalty_n))
}

fn bic_from_values(fit: &FpqrFit, y: &DMatrix<f64>, pred: &DMatrix<f64>, penalty_n: usize) -> f64 {
    let tau = fit.config.tau;
    let loss: Vec<f64> = (0..y.ncols())
        .map(|j| (0..y.nrows()).map(|i| check_loss(y[(i, j)] - pred[(i, j)], tau)).sum())
        .collect();
    let sq: Vec<f64> = loss.iter().map(|l| l * l).collect();
    let norm = trapezoid(&fit.y_grid, &sq).max(0.0).sqrt();
    let cfg = &fit.config;
    let omega = (cfg.k_y + cfg.k_x + cfg.n_components) as f64;
    norm.max(BIC_NORM_FLOOR).ln() + omega * (penalty_n as f64).ln()
}

/// Seeded random partition of `0..n` into `folds` contiguous blocks of a
/// shuffled order; block sizes differ by at most one.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds == 0 || n < folds {
        return invalid(format!("cannot split {n} curves into {folds} folds"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / folds, n % folds);
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        out.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(out)
}

fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

/// Held-out BIC of every `h` in `h_grid` for one `(K_Y, K_X)` pair and one fold.
#[allow(clippy::too_many_arguments)]
fn score_fold(
    y: &DiscreteCurveSet,
    ys: &Side,
    xs: &Side,
    train: &[usize],
    test: &[usize],
    tau: QuantileLevel,
    method: QcovMethod,
    spec: &GridSpec,
    penalty_n: usize,
) -> Vec<std::result::Result<f64, String>> {
    let (k_y, k_x) = (ys.basis.num_basis(), xs.basis.num_basis());
    let cfg_for = |h| FpqrConfig {
        tau,
        n_components: h,
        qcov_method: method,
        k_y,
        k_x,
        order_y: spec.order,
        order_x: spec.order,
    };
    let usable: Vec<usize> = spec
        .h_grid
        .iter()
        .copied()
        .filter(|&h| cfg_for(h).validate().is_ok() && check_sizes(train.len(), &cfg_for(h)).is_ok())
        .collect();
    let h_max = usable.iter().copied().max().unwrap_or(0);

    let lambda_c = center_columns(select_rows(&ys.coords, train), true);
    let pi_c = center_columns(select_rows(&xs.coords, train), true);
    let (comps, extract_err) = if h_max > 0 {
        extract_up_to(&lambda_c.coords, &pi_c.coords, h_max, &|l: &DMatrix<f64>, p: &DMatrix<f64>| {
            qcov(method, l, p, tau).map(|q| q.entries)
        })
    } else {
        (Default::default(), None)
    };

    let y_test = select_rows(y.values(), test);
    let x_test = select_rows(&xs.coords, test);

    spec.h_grid
        .iter()
        .map(|&h| {
            let cfg = cfg_for(h);
            cfg.validate().map_err(|e| e.to_string())?;
            check_sizes(train.len(), &cfg).map_err(|e| e.to_string())?;
            if h > comps.len() {
                return Err(extract_err
                    .clone()
                    .unwrap_or(FpqrError::DegenerateComponent { component: comps.len() + 1 })
                    .to_string());
            }
            let fit = finish_fit(ys, xs, lambda_c.clone(), pi_c.clone(), comps.prefix(h), &cfg)
                .map_err(|e| e.to_string())?;
            let coords = fit.predict_coords(&x_test);
            let pred = curves_from_half_coords(&coords, &fit.y_basis, &fit.y_grid).map_err(|e| e.to_string())?;
            Ok(bic_from_values(&fit, &y_test, &pred, penalty_n))
        })
        .collect()
}

/// K-fold cross-validated grid search; returns every cell's mean BIC and the
/// selected cell (smallest mean BIC, ties to smallest `K_Y + K_X + h`, then
/// lexicographic).
pub fn grid_search_cv(
    y: &DiscreteCurveSet,
    x: &DiscreteCurveSet,
    tau: QuantileLevel,
    method: QcovMethod,
    spec: &GridSpec,
) -> Result<CvResult> {
    spec.validate()?;
    let n = y.n_curves();
    if x.n_curves() != n {
        return invalid(format!("{n} response curves but {} predictor curves", x.n_curves()));
    }
    let folds = fold_assignment(n, spec.folds, spec.seed)?;
    let fold_sizes: Vec<usize> = folds.iter().map(Vec::len).collect();

    let smooth_all = |curves: &DiscreteCurveSet, grid: &[usize]| -> BTreeMap<usize, std::result::Result<Side, String>> {
        let mut ks: Vec<usize> = grid.to_vec();
        ks.sort_unstable();
        ks.dedup();
        ks.into_par_iter()
            .map(|k| (k, side(curves, k, spec.order).map_err(|e| e.to_string())))
            .collect::<Vec<_>>()
            .into_iter()
            .collect()
    };
    let y_sides = smooth_all(y, &spec.k_y_grid);
    let x_sides = smooth_all(x, &spec.k_x_grid);

    let mut tasks = Vec::new();
    for &k_y in &spec.k_y_grid {
        for &k_x in &spec.k_x_grid {
            for f in 0..spec.folds {
                tasks.push((k_y, k_x, f));
            }
        }
    }

    let scored: Vec<Vec<std::result::Result<f64, String>>> = tasks
        .par_iter()
        .map(|&(k_y, k_x, f)| {
            let (ys, xs) = match (&y_sides[&k_y], &x_sides[&k_x]) {
                (Ok(ys), Ok(xs)) => (ys, xs),
                (Err(e), _) | (_, Err(e)) => return vec![Err(e.clone()); spec.h_grid.len()],
            };
            let test = &folds[f];
            let train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, rows)| rows.iter().copied())
                .collect();
            let penalty_n = match spec.penalty {
                PenaltySize::TestSet => test.len(),
                PenaltySize::Total => n,
            };
            score_fold(y, ys, xs, &train, test, tau, method, spec, penalty_n)
        })
        .collect();

    let mut cells = Vec::with_capacity(spec.n_cells());
    let mut task = 0;
    for &k_y in &spec.k_y_grid {
        for &k_x in &spec.k_x_grid {
            let per_fold = &scored[task..task + spec.folds];
            task += spec.folds;
            for (hi, &h) in spec.h_grid.iter().enumerate() {
                let mut fold_bics = Vec::with_capacity(spec.folds);
                let mut error = None;
                for fold in per_fold {
                    match &fold[hi] {
                        Ok(b) => fold_bics.push(*b),
                        Err(e) => {
                            fold_bics.push(f64::INFINITY);
                            error.get_or_insert_with(|| e.clone());
                        }
                    }
                }
                let mean_bic = if error.is_some() {
                    f64::INFINITY
                } else {
                    fold_bics.iter().sum::<f64>() / spec.folds as f64
                };
                cells.push(CvCell { k_y, k_x, h, mean_bic, fold_bics, error });
            }
        }
    }

    let best = (0..cells.len())
        .filter(|&i| cells[i].is_feasible())
        .min_by(|&a, &b| {
            let (ca, cb) = (&cells[a], &cells[b]);
            ca.mean_bic
                .total_cmp(&cb.mean_bic)
                .then(ca.omega().cmp(&cb.omega()))
                .then((ca.k_y, ca.k_x, ca.h).cmp(&(cb.k_y, cb.k_x, cb.h)))
        })
        .ok_or(FpqrError::NoFeasibleModel)?;
    Ok(CvResult { cells, best, fold_sizes })
}
