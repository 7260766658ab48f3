//! `fit`, `predict` and `interval`.

use std::fs;
use std::path::{Path, PathBuf};

use fpqr::basis::DiscreteCurveSet;
use nalgebra::DMatrix;

use super::{fit_model, quantile_level, write_cv_table};
use crate::args::{FitArgs, IntervalArgs, PredictArgs};
use crate::curves::{read_curves, write_curves, write_table};
use crate::error::{usage, CliError, CliResult};
use crate::model_file::{load_model, save_model};

fn sibling(path: &Path, name: &str) -> PathBuf {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => dir.join(name),
        _ => PathBuf::from(name),
    }
}

pub fn run_fit(a: &FitArgs) -> CliResult<()> {
    let tau = quantile_level(a.tau, "tau")?;
    let y = read_curves(&a.y)?.curves;
    let x = read_curves(&a.x)?.curves;
    let (fit, cv) = fit_model(&a.model, &y, &x, tau)?;

    save_model(&a.model_out, &fit)?;
    if let Some(cv) = &cv {
        let path = a.cv_table.clone().unwrap_or_else(|| sibling(&a.model_out, "cv_table.csv"));
        write_cv_table(&path, cv)?;
    }
    if let Some(path) = &a.surface_out {
        let surface = fit
            .coefficient_surface()
            .evaluate(&fit.x_grid, &fit.y_grid)
            .map_err(|e| CliError::stage("surface", e))?;
        let ids: Vec<String> = fit.x_grid.iter().map(f64::to_string).collect();
        write_table(path, &fit.y_grid, &ids, &surface)?;
    }
    if let Some(path) = &a.intercept_out {
        let alpha = fit.intercept_function();
        let values = DMatrix::from_row_slice(1, alpha.len(), &alpha);
        write_table(path, &fit.y_grid, &["alpha".to_string()], &values)?;
    }
    let c = fit.config;
    println!("selected K_Y={} K_X={} h={}", c.k_y, c.k_x, c.n_components);
    Ok(())
}

pub fn run_predict(a: &PredictArgs) -> CliResult<()> {
    let fit = load_model(&a.model)?;
    let table = read_curves(&a.x)?;
    if !table.curves.same_grid(&fit.x_grid) {
        return usage(format!("{}: grid differs from the model's predictor grid", a.x.display()));
    }
    let pred = fit.predict(&table.curves).map_err(|e| CliError::stage("predict", e))?;
    write_curves(&a.out, &pred, &table.ids)
}

/// Fraction of (curve, point) pairs where the lower bound exceeds the upper.
pub fn crossing_fraction(lo: &DiscreteCurveSet, hi: &DiscreteCurveSet) -> f64 {
    let (l, h) = (lo.values(), hi.values());
    let crossed = l.iter().zip(h.iter()).filter(|(a, b)| a > b).count();
    crossed as f64 / l.len() as f64
}

pub fn run_interval(a: &IntervalArgs) -> CliResult<()> {
    let lo_tau = quantile_level(a.tau_lo, "tau-lo")?;
    let hi_tau = quantile_level(a.tau_hi, "tau-hi")?;
    if a.tau_lo > a.tau_hi {
        return usage(format!("--tau-lo ({}) exceeds --tau-hi ({})", a.tau_lo, a.tau_hi));
    }
    let y = read_curves(&a.y_train)?.curves;
    let x = read_curves(&a.x_train)?.curves;
    let test = read_curves(&a.x_test)?;
    if !test.curves.same_grid(x.grid()) {
        return usage("test predictor grid differs from the training grid");
    }

    let (fit_lo, _) = fit_model(&a.model, &y, &x, lo_tau)?;
    let (fit_hi, _) = fit_model(&a.model, &y, &x, hi_tau)?;
    let q_lo = fit_lo.predict(&test.curves).map_err(|e| CliError::stage("predict", e))?;
    let q_hi = fit_hi.predict(&test.curves).map_err(|e| CliError::stage("predict", e))?;

    fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(&a.out_dir, e))?;
    write_curves(&a.out_dir.join("q_lo.csv"), &q_lo, &test.ids)?;
    write_curves(&a.out_dir.join("q_hi.csv"), &q_hi, &test.ids)?;
    println!("crossing fraction: {}", crossing_fraction(&q_lo, &q_hi));
    Ok(())
}
