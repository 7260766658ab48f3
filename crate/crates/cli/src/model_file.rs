//! Versioned JSON model files.

use std::fs;
use std::path::Path;

use fpqr::basis::make_basis;
use fpqr::fpqr::{Components, FpqrConfig, FpqrFit};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const FORMAT_NAME: &str = "fpqr-model";
pub const FORMAT_VERSION: u32 = 1;

/// Everything needed to predict; training scores are not stored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub config: FpqrConfig,
    pub y_grid: Vec<f64>,
    pub x_grid: Vec<f64>,
    pub y_knots: Vec<f64>,
    pub x_knots: Vec<f64>,
    pub weights: Vec<Vec<f64>>,
    pub x_loadings: Vec<Vec<f64>>,
    pub y_loadings: Vec<Vec<f64>>,
    pub b_hat: Vec<Vec<f64>>,
    pub omega_hat: Vec<Vec<f64>>,
    pub lambda_means: Vec<f64>,
    pub pi_means: Vec<f64>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(name: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> CliResult<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::Usage(format!("model file: {name} is not {nrows}x{ncols}")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl ModelFile {
    pub fn from_fit(fit: &FpqrFit) -> Self {
        Self {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            config: fit.config,
            y_grid: fit.y_grid.clone(),
            x_grid: fit.x_grid.clone(),
            y_knots: fit.y_basis.knots().to_vec(),
            x_knots: fit.x_basis.knots().to_vec(),
            weights: rows(&fit.components.weights),
            x_loadings: rows(&fit.components.x_loadings),
            y_loadings: rows(&fit.components.y_loadings),
            b_hat: rows(&fit.b_hat),
            omega_hat: rows(&fit.omega_hat),
            lambda_means: fit.lambda_means.clone(),
            pi_means: fit.pi_means.clone(),
        }
    }

    pub fn into_fit(self) -> CliResult<FpqrFit> {
        if self.format != FORMAT_NAME {
            return Err(CliError::Usage(format!("not a model file (format '{}')", self.format)));
        }
        if self.version != FORMAT_VERSION {
            return Err(CliError::Usage(format!("unsupported model file version {}", self.version)));
        }
        let cfg = self.config;
        cfg.validate().map_err(|e| CliError::Usage(format!("model file: {e}")))?;
        let domain = |g: &[f64]| -> CliResult<(f64, f64)> {
            match (g.first(), g.last()) {
                (Some(&a), Some(&b)) if g.len() >= 4 => Ok((a, b)),
                _ => Err(CliError::Usage("model file: grid too short".into())),
            }
        };
        let y_basis = make_basis(domain(&self.y_grid)?, cfg.k_y, cfg.order_y)
            .map_err(|e| CliError::Usage(format!("model file: {e}")))?;
        let x_basis = make_basis(domain(&self.x_grid)?, cfg.k_x, cfg.order_x)
            .map_err(|e| CliError::Usage(format!("model file: {e}")))?;
        if y_basis.knots() != self.y_knots.as_slice() || x_basis.knots() != self.x_knots.as_slice() {
            return Err(CliError::Usage("model file: knot vectors do not match the stored configuration".into()));
        }
        let h = cfg.n_components;
        let (ky, kx) = (cfg.k_y, cfg.k_x);
        if self.lambda_means.len() != ky || self.pi_means.len() != kx {
            return Err(CliError::Usage("model file: coordinate means have the wrong length".into()));
        }
        let components = Components {
            scores: DMatrix::zeros(0, h),
            weights: matrix("weights", &self.weights, kx, h)?,
            x_loadings: matrix("x_loadings", &self.x_loadings, kx, h)?,
            y_loadings: matrix("y_loadings", &self.y_loadings, ky, h)?,
        };
        Ok(FpqrFit {
            config: cfg,
            y_grid: self.y_grid,
            x_grid: self.x_grid,
            y_basis,
            x_basis,
            components,
            b_hat: matrix("b_hat", &self.b_hat, h + 1, ky)?,
            omega_hat: matrix("omega_hat", &self.omega_hat, kx, ky)?,
            lambda_means: self.lambda_means,
            pi_means: self.pi_means,
        })
    }
}

pub fn save_model(path: &Path, fit: &FpqrFit) -> CliResult<()> {
    let text = serde_json::to_string_pretty(&ModelFile::from_fit(fit))
        .map_err(|e| CliError::Numerical(format!("serialising model: {e}")))?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

pub fn load_model(path: &Path) -> CliResult<FpqrFit> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: invalid model file: {e}", path.display())))?;
    file.into_fit()
}
