pub mod bench;
pub mod evaluate;
pub mod fit;
pub mod forecast;
pub mod mc;
pub mod simulate;

use std::fs::File;
use std::path::Path;

use fpqr::basis::DiscreteCurveSet;
use fpqr::fpqr::{fit, FpqrConfig, FpqrFit};
use fpqr::modelsel::{grid_search_cv, CvResult, GridSpec, PenaltySize};
use fpqr::quantreg::QuantileLevel;

use crate::args::{GridArgs, ModelArgs, Penalty};
use crate::error::{usage, CliError, CliResult};

pub fn quantile_level(tau: f64, flag: &str) -> CliResult<QuantileLevel> {
    QuantileLevel::new(tau).map_err(|_| CliError::Usage(format!("--{flag} must lie in (0, 1), got {tau}")))
}

pub fn grid_spec(g: &GridArgs, seed: u64) -> GridSpec {
    GridSpec {
        k_y_grid: g.k_y_grid.clone(),
        k_x_grid: g.k_x_grid.clone(),
        h_grid: g.h_grid.clone(),
        folds: g.folds,
        seed,
        penalty: match g.penalty {
            Penalty::Fold => PenaltySize::TestSet,
            Penalty::Total => PenaltySize::Total,
        },
        order: g.order,
    }
}

pub fn check_pair(y: &DiscreteCurveSet, x: &DiscreteCurveSet) -> CliResult<()> {
    if y.n_curves() != x.n_curves() {
        return usage(format!("{} response curves but {} predictor curves", y.n_curves(), x.n_curves()));
    }
    Ok(())
}

/// Resolves the model size from fixed flags or a grid search.
pub fn select_config(
    m: &ModelArgs,
    y: &DiscreteCurveSet,
    x: &DiscreteCurveSet,
    tau: QuantileLevel,
) -> CliResult<(FpqrConfig, Option<CvResult>)> {
    let order = m.grid.order;
    if m.auto {
        let spec = grid_spec(&m.grid, m.cv_seed);
        let cv = grid_search_cv(y, x, tau, m.qcov, &spec).map_err(|e| CliError::stage("grid search", e))?;
        let (k_y, k_x, h) = cv.best_params();
        let cfg = FpqrConfig { order_y: order, order_x: order, ..FpqrConfig::new(tau, h, m.qcov, k_y, k_x) };
        return Ok((cfg, Some(cv)));
    }
    match (m.k_y, m.k_x, m.h) {
        (Some(k_y), Some(k_x), Some(h)) => {
            let cfg = FpqrConfig { order_y: order, order_x: order, ..FpqrConfig::new(tau, h, m.qcov, k_y, k_x) };
            cfg.validate().map_err(|e| CliError::stage("configuration", e))?;
            Ok((cfg, None))
        }
        _ => usage("give --k-y, --k-x and --h, or --auto"),
    }
}

/// Selects the model size and fits it.
pub fn fit_model(
    m: &ModelArgs,
    y: &DiscreteCurveSet,
    x: &DiscreteCurveSet,
    tau: QuantileLevel,
) -> CliResult<(FpqrFit, Option<CvResult>)> {
    check_pair(y, x)?;
    let (cfg, cv) = select_config(m, y, x, tau)?;
    let f = fit(y, x, &cfg).map_err(|e| CliError::stage("fit", e))?;
    Ok((f, cv))
}

pub fn csv_writer(path: &Path) -> CliResult<csv::Writer<File>> {
    let f = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

pub fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::io(path, e)
}

pub fn write_cv_table(path: &Path, cv: &CvResult) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    let folds = cv.fold_sizes.len();
    let mut header = vec!["k_y".to_string(), "k_x".into(), "h".into(), "omega".into(), "mean_bic".into()];
    header.extend((1..=folds).map(|f| format!("fold{f}_bic")));
    header.extend(["selected".into(), "error".into()]);
    w.write_record(&header).map_err(csv_err(path))?;
    for (i, c) in cv.cells.iter().enumerate() {
        let mut row = vec![
            c.k_y.to_string(),
            c.k_x.to_string(),
            c.h.to_string(),
            c.omega().to_string(),
            c.mean_bic.to_string(),
        ];
        row.extend(c.fold_bics.iter().map(f64::to_string));
        row.push(u8::from(i == cv.best).to_string());
        row.push(c.error.clone().unwrap_or_default());
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
