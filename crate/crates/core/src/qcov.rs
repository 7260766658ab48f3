//! Quantile covariance between response and predictor coordinate matrices.
//!
//! All estimators return a `K_X x K_Y` matrix (predictor coordinates as rows)
//! so that `Q Q^T` lives in predictor space.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, FpqrError, Result};
use crate::numerics::{quantile_type7, sample_variance};
use crate::quantreg::{qreg_simple, QuantileLevel};

/// Columns whose variance falls below this fraction of the largest column
/// variance are treated as constant.
const DEGENERATE_VAR_REL: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QcovMethod {
    /// Slope of each univariate quantile regression times the predictor variance.
    Dodge,
    /// Signed geometric mean of the two regression slopes, rescaled by the variances.
    Choi,
    /// Quantile-indicator cross products with standardised predictors.
    Li,
}

impl QcovMethod {
    pub const ALL: [QcovMethod; 3] = [QcovMethod::Dodge, QcovMethod::Choi, QcovMethod::Li];

    pub fn name(self) -> &'static str {
        match self {
            QcovMethod::Dodge => "dodge",
            QcovMethod::Choi => "choi",
            QcovMethod::Li => "li",
        }
    }
}

impl fmt::Display for QcovMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QcovMethod {
    type Err = FpqrError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dodge" => Ok(QcovMethod::Dodge),
            "choi" => Ok(QcovMethod::Choi),
            "li" => Ok(QcovMethod::Li),
            other => invalid(format!("unknown quantile covariance method '{other}'")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct QcovMatrix {
    /// `K_X x K_Y`.
    pub entries: DMatrix<f64>,
    pub method: QcovMethod,
    pub tau: QuantileLevel,
}

/// Dispatches to the estimator named by `method`.
pub fn qcov(
    method: QcovMethod,
    lambda: &DMatrix<f64>,
    pi: &DMatrix<f64>,
    tau: QuantileLevel,
) -> Result<QcovMatrix> {
    match method {
        QcovMethod::Dodge => qcov_dodge(lambda, pi, tau),
        QcovMethod::Choi => qcov_choi(lambda, pi, tau),
        QcovMethod::Li => qcov_li(lambda, pi, tau),
    }
}

fn check_shapes(lambda: &DMatrix<f64>, pi: &DMatrix<f64>, min_rows: usize) -> Result<()> {
    if lambda.nrows() != pi.nrows() {
        return invalid(format!(
            "response coordinates have {} rows, predictor coordinates {}",
            lambda.nrows(),
            pi.nrows()
        ));
    }
    if lambda.ncols() == 0 || pi.ncols() == 0 {
        return invalid("empty coordinate matrix");
    }
    if lambda.nrows() < min_rows {
        return invalid(format!("quantile covariance needs at least {min_rows} rows"));
    }
    Ok(())
}

fn column_variances(m: &DMatrix<f64>) -> Vec<f64> {
    m.column_iter()
        .map(|c| sample_variance(c.as_slice()))
        .collect()
}

fn degenerate_flags(vars: &[f64]) -> Vec<bool> {
    let top = vars.iter().copied().fold(0.0, f64::max);
    vars.iter().map(|&v| v <= DEGENERATE_VAR_REL * top || v == 0.0).collect()
}

/// Quantile covariance from quantile-indicator residuals.
///
/// `Γ = τ - 1(Λ - Q_τ(Λ) < 0)` per column, `Π*` the standardised predictors,
/// entries `Π*ᵀ Γ / K_X`.
pub fn qcov_li(lambda: &DMatrix<f64>, pi: &DMatrix<f64>, tau: QuantileLevel) -> Result<QcovMatrix> {
    check_shapes(lambda, pi, 2)?;
    let (n, ky) = lambda.shape();
    let kx = pi.ncols();
    let t = tau.value();

    let vars = column_variances(pi);
    let flags = degenerate_flags(&vars);
    if let Some(column) = flags.iter().position(|&f| f) {
        return Err(FpqrError::DegenerateColumn { column });
    }

    let mut gamma = DMatrix::<f64>::zeros(n, ky);
    for j in 0..ky {
        let col = lambda.column(j);
        let q = quantile_type7(col.as_slice(), t);
        for i in 0..n {
            gamma[(i, j)] = if col[i] - q < 0.0 { t - 1.0 } else { t };
        }
    }

    let mut standardized = pi.clone();
    for k in 0..kx {
        let mut col = standardized.column_mut(k);
        let mean = col.mean();
        let sd = vars[k].sqrt();
        col.apply(|v| *v = (*v - mean) / sd);
    }

    let entries = standardized.transpose() * gamma / kx as f64;
    Ok(QcovMatrix { entries, method: QcovMethod::Li, tau })
}

/// Symmetrised slope-based quantile covariance (two regressions per pair).
pub fn qcov_choi(lambda: &DMatrix<f64>, pi: &DMatrix<f64>, tau: QuantileLevel) -> Result<QcovMatrix> {
    check_shapes(lambda, pi, 3)?;
    let (ky, kx) = (lambda.ncols(), pi.ncols());
    let lvars = column_variances(lambda);
    let pvars = column_variances(pi);
    let lflat = degenerate_flags(&lvars);
    let pflat = degenerate_flags(&pvars);

    let rows: Vec<Result<Vec<f64>>> = (0..kx)
        .into_par_iter()
        .map(|k| {
            let pk = pi.column(k);
            (0..ky)
                .map(|j| {
                    if pflat[k] || lflat[j] {
                        return Ok(0.0);
                    }
                    let lj = lambda.column(j);
                    let (_, slope_lp) = qreg_simple(pk.as_slice(), lj.as_slice(), tau)
                        .map_err(|e| pair_error(e, k, j))?;
                    let (_, slope_pl) = qreg_simple(lj.as_slice(), pk.as_slice(), tau)
                        .map_err(|e| pair_error(e, k, j))?;
                    let magnitude = (slope_pl * slope_lp).max(0.0).sqrt();
                    Ok(sign(slope_pl) * magnitude * (pvars[k] * lvars[j]).sqrt())
                })
                .collect()
        })
        .collect();
    let entries = assemble(rows, kx, ky)?;
    Ok(QcovMatrix { entries, method: QcovMethod::Choi, tau })
}

/// Slope of the quantile regression of each response column on each
/// predictor column, scaled by the predictor variance.
pub fn qcov_dodge(lambda: &DMatrix<f64>, pi: &DMatrix<f64>, tau: QuantileLevel) -> Result<QcovMatrix> {
    check_shapes(lambda, pi, 3)?;
    let (ky, kx) = (lambda.ncols(), pi.ncols());
    let lvars = column_variances(lambda);
    let pvars = column_variances(pi);
    let lflat = degenerate_flags(&lvars);
    let pflat = degenerate_flags(&pvars);

    let rows: Vec<Result<Vec<f64>>> = (0..kx)
        .into_par_iter()
        .map(|k| {
            let pk = pi.column(k);
            (0..ky)
                .map(|j| {
                    if pflat[k] || lflat[j] {
                        return Ok(0.0);
                    }
                    let (_, slope) = qreg_simple(pk.as_slice(), lambda.column(j).as_slice(), tau)
                        .map_err(|e| pair_error(e, k, j))?;
                    Ok(slope * pvars[k])
                })
                .collect()
        })
        .collect();
    let entries = assemble(rows, kx, ky)?;
    Ok(QcovMatrix { entries, method: QcovMethod::Dodge, tau })
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn pair_error(e: FpqrError, k: usize, j: usize) -> FpqrError {
    FpqrError::NumericalFailure(format!("pair (predictor {k}, response {j}): {e}"))
}

fn assemble(rows: Vec<Result<Vec<f64>>>, kx: usize, ky: usize) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(kx, ky);
    for (k, row) in rows.into_iter().enumerate() {
        for (j, v) in row?.into_iter().enumerate() {
            out[(k, j)] = v;
        }
    }
    Ok(out)
}
