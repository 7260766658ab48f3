//! Functional partial quantile regression: component extraction with
//! deflation, quantile regression on the components, and the map back to the
//! coefficient surface, intercept function and predictions.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{
    center_columns, curves_from_half_coords, eval_basis, from_half_coords, make_basis,
    smooth_curves, to_half_coords, BSplineBasis, CoeffMatrix, DiscreteCurveSet, DEFAULT_ORDER,
};
use crate::error::{invalid, FpqrError, Result};
use crate::numerics::{condition_number, solve_square, sym_eigen, SymMatrix};
use crate::qcov::{qcov, QcovMethod};
use crate::quantreg::{qreg_fit_multi, QuantileLevel};

/// `‖t‖²` below this fraction of `‖Π̃‖²_F` means the predictor data are exhausted.
const COMPONENT_TOL: f64 = 1e-12;
/// Largest accepted condition number of `DᵀP`.
const BACKMAP_MAX_COND: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpqrConfig {
    pub tau: QuantileLevel,
    /// Number of extracted components `h`.
    pub n_components: usize,
    pub qcov_method: QcovMethod,
    pub k_y: usize,
    pub k_x: usize,
    pub order_y: usize,
    pub order_x: usize,
}

impl FpqrConfig {
    /// Cubic bases on both sides.
    pub fn new(tau: QuantileLevel, n_components: usize, qcov_method: QcovMethod, k_y: usize, k_x: usize) -> Self {
        Self {
            tau,
            n_components,
            qcov_method,
            k_y,
            k_x,
            order_y: DEFAULT_ORDER,
            order_x: DEFAULT_ORDER,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_components == 0 {
            return invalid("number of components must be positive");
        }
        if self.n_components > self.k_x {
            return invalid(format!(
                "number of components ({}) exceeds predictor basis size ({})",
                self.n_components, self.k_x
            ));
        }
        for (name, k, order) in [("response", self.k_y, self.order_y), ("predictor", self.k_x, self.order_x)] {
            if order < 2 || k < order {
                return invalid(format!("{name} basis needs K >= order >= 2 (K={k}, order={order})"));
            }
        }
        Ok(())
    }
}

/// Extracted components, one column per component.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Components {
    /// `T`, `n x h`.
    pub scores: DMatrix<f64>,
    /// `P`, `K_X x h`.
    pub weights: DMatrix<f64>,
    /// `D`, `K_X x h`.
    pub x_loadings: DMatrix<f64>,
    /// `K_Y x h`.
    pub y_loadings: DMatrix<f64>,
}

impl Components {
    fn empty(n: usize, kx: usize, ky: usize) -> Self {
        Self {
            scores: DMatrix::zeros(n, 0),
            weights: DMatrix::zeros(kx, 0),
            x_loadings: DMatrix::zeros(kx, 0),
            y_loadings: DMatrix::zeros(ky, 0),
        }
    }

    pub fn len(&self) -> usize {
        self.scores.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The first `h` components.
    pub fn prefix(&self, h: usize) -> Self {
        Self {
            scores: self.scores.columns(0, h).into_owned(),
            weights: self.weights.columns(0, h).into_owned(),
            x_loadings: self.x_loadings.columns(0, h).into_owned(),
            y_loadings: self.y_loadings.columns(0, h).into_owned(),
        }
    }
}

/// Extracts `cfg.n_components` components from centred coordinates.
pub fn extract_components(lambda_c: &CoeffMatrix, pi_c: &CoeffMatrix, cfg: &FpqrConfig) -> Result<Components> {
    let (method, tau) = (cfg.qcov_method, cfg.tau);
    extract_components_with(lambda_c, pi_c, cfg.n_components, |l, p| {
        qcov(method, l, p, tau).map(|q| q.entries)
    })
}

/// [`extract_components`] with a caller-supplied quantile covariance
/// (`(Λ̃, Π̃) -> K_X x K_Y`).
pub fn extract_components_with<F>(lambda_c: &CoeffMatrix, pi_c: &CoeffMatrix, h: usize, qcov_fn: F) -> Result<Components>
where
    F: Fn(&DMatrix<f64>, &DMatrix<f64>) -> Result<DMatrix<f64>>,
{
    if !lambda_c.centered || !pi_c.centered {
        return invalid("component extraction needs centred coordinates");
    }
    if lambda_c.coords.nrows() != pi_c.coords.nrows() {
        return invalid("response and predictor coordinates differ in row count");
    }
    if h == 0 || h > pi_c.coords.ncols() {
        return invalid(format!("cannot extract {h} components from {} predictor coordinates", pi_c.coords.ncols()));
    }
    if pi_c.coords.nrows() <= h {
        return invalid(format!("need more than {h} curves to extract {h} components"));
    }
    let (comps, err) = extract_up_to(&lambda_c.coords, &pi_c.coords, h, &qcov_fn);
    match err {
        Some(e) => Err(e),
        None => Ok(comps),
    }
}

/// Extracts up to `h` components, stopping at the first failure. The
/// components found before the failure are returned alongside the error.
pub(crate) fn extract_up_to<F>(
    lambda: &DMatrix<f64>,
    pi: &DMatrix<f64>,
    h: usize,
    qcov_fn: &F,
) -> (Components, Option<FpqrError>)
where
    F: Fn(&DMatrix<f64>, &DMatrix<f64>) -> Result<DMatrix<f64>>,
{
    let (n, kx) = pi.shape();
    let ky = lambda.ncols();
    let mut out = Components::empty(n, kx, ky);
    let mut lam = lambda.clone();
    let mut pit = pi.clone();
    let original_sq = pi.norm_squared();

    for comp in 1..=h {
        // Deflation leaves round-off residue once the predictor rank is used up.
        if pit.norm_squared() < COMPONENT_TOL * original_sq {
            return (out, Some(FpqrError::DegenerateComponent { component: comp }));
        }
        match next_component(&lam, &pit, comp, qcov_fn) {
            Ok((t, p, delta, q)) => {
                lam -= &t * q.transpose();
                pit -= &t * delta.transpose();
                out.scores = out.scores.insert_column(comp - 1, 0.0);
                out.scores.set_column(comp - 1, &t);
                out.weights = out.weights.insert_column(comp - 1, 0.0);
                out.weights.set_column(comp - 1, &p);
                out.x_loadings = out.x_loadings.insert_column(comp - 1, 0.0);
                out.x_loadings.set_column(comp - 1, &delta);
                out.y_loadings = out.y_loadings.insert_column(comp - 1, 0.0);
                out.y_loadings.set_column(comp - 1, &q);
            }
            Err(e) => return (out, Some(e)),
        }
    }
    (out, None)
}

type ColumnVec = nalgebra::DVector<f64>;

fn next_component<F>(
    lam: &DMatrix<f64>,
    pit: &DMatrix<f64>,
    comp: usize,
    qcov_fn: &F,
) -> Result<(ColumnVec, ColumnVec, ColumnVec, ColumnVec)>
where
    F: Fn(&DMatrix<f64>, &DMatrix<f64>) -> Result<DMatrix<f64>>,
{
    let pi_norm_sq = pit.norm_squared();
    if pi_norm_sq == 0.0 {
        return Err(FpqrError::DegenerateComponent { component: comp });
    }
    let q = qcov_fn(lam, pit)?;
    if q.shape() != (pit.ncols(), lam.ncols()) {
        return Err(FpqrError::NumericalFailure(format!(
            "quantile covariance has shape {:?}, expected {:?}",
            q.shape(),
            (pit.ncols(), lam.ncols())
        )));
    }
    let qqt = SymMatrix::new(&q * q.transpose())?;
    let p = ColumnVec::from_vec(sym_eigen(&qqt)?.leading_vector());
    let t = pit * &p;
    let tt = t.norm_squared();
    if tt < COMPONENT_TOL * pi_norm_sq {
        return Err(FpqrError::DegenerateComponent { component: comp });
    }
    let delta = pit.transpose() * &t / tt;
    let qload = lam.transpose() * &t / tt;
    Ok((t, p, delta, qload))
}

/// A fitted model. Immutable after construction; safe to share across threads.
#[derive(Debug, Clone)]
pub struct FpqrFit {
    pub config: FpqrConfig,
    pub y_grid: Vec<f64>,
    pub x_grid: Vec<f64>,
    pub y_basis: BSplineBasis,
    pub x_basis: BSplineBasis,
    pub components: Components,
    /// `(h+1) x K_Y`; row 0 holds the intercepts.
    pub b_hat: DMatrix<f64>,
    /// `K_X x K_Y`.
    pub omega_hat: DMatrix<f64>,
    pub lambda_means: Vec<f64>,
    pub pi_means: Vec<f64>,
}

/// One side of the regression: sampling grid, basis and uncentred
/// half-Gram coordinates of every curve.
#[derive(Debug, Clone)]
pub(crate) struct Side {
    pub grid: Vec<f64>,
    pub basis: BSplineBasis,
    pub coords: DMatrix<f64>,
}

pub(crate) fn side(curves: &DiscreteCurveSet, k: usize, order: usize) -> Result<Side> {
    let basis = make_basis(curves.domain(), k, order)?;
    let coords = to_half_coords(&smooth_curves(curves, &basis)?, &basis, false)?.coords;
    Ok(Side { grid: curves.grid().to_vec(), basis, coords })
}

pub(crate) fn check_sizes(n: usize, cfg: &FpqrConfig) -> Result<()> {
    let needed = cfg.k_x.max(cfg.k_y).max(cfg.n_components + 1);
    if n <= needed {
        return invalid(format!(
            "{n} curves are too few for K_Y={}, K_X={}, h={} (need more than {needed})",
            cfg.k_y, cfg.k_x, cfg.n_components
        ));
    }
    Ok(())
}

/// Fits the model end to end with the configured quantile covariance.
pub fn fit(y: &DiscreteCurveSet, x: &DiscreteCurveSet, cfg: &FpqrConfig) -> Result<FpqrFit> {
    let (method, tau) = (cfg.qcov_method, cfg.tau);
    fit_with_qcov(y, x, cfg, |l, p| qcov(method, l, p, tau).map(|q| q.entries))
}

/// [`fit`] with a caller-supplied quantile covariance (`(Λ̃, Π̃) -> K_X x K_Y`).
pub fn fit_with_qcov<F>(y: &DiscreteCurveSet, x: &DiscreteCurveSet, cfg: &FpqrConfig, qcov_fn: F) -> Result<FpqrFit>
where
    F: Fn(&DMatrix<f64>, &DMatrix<f64>) -> Result<DMatrix<f64>>,
{
    cfg.validate()?;
    if y.n_curves() != x.n_curves() {
        return invalid(format!("{} response curves but {} predictor curves", y.n_curves(), x.n_curves()));
    }
    check_sizes(y.n_curves(), cfg)?;
    let ys = side(y, cfg.k_y, cfg.order_y)?;
    let xs = side(x, cfg.k_x, cfg.order_x)?;
    let lambda_c = center_columns(ys.coords.clone(), true);
    let pi_c = center_columns(xs.coords.clone(), true);
    let (comps, err) = extract_up_to(&lambda_c.coords, &pi_c.coords, cfg.n_components, &qcov_fn);
    if let Some(e) = err {
        return Err(e);
    }
    finish_fit(&ys, &xs, lambda_c, pi_c, comps, cfg)
}

pub(crate) fn finish_fit(
    ys: &Side,
    xs: &Side,
    lambda_c: CoeffMatrix,
    pi_c: CoeffMatrix,
    comps: Components,
    cfg: &FpqrConfig,
) -> Result<FpqrFit> {
    let h = comps.len();
    let sol = qreg_fit_multi(&comps.scores, &lambda_c.coords, cfg.tau, true)?;
    let b_hat = sol.coefficients;
    let slopes = b_hat.rows(1, h).into_owned();

    let dtp = comps.x_loadings.transpose() * &comps.weights;
    let condition = condition_number(&dtp);
    if !(condition < BACKMAP_MAX_COND) {
        return Err(FpqrError::IllConditioned { condition });
    }
    let omega_hat = &comps.weights * solve_square(&dtp, &slopes)?;

    Ok(FpqrFit {
        config: *cfg,
        y_grid: ys.grid.clone(),
        x_grid: xs.grid.clone(),
        y_basis: ys.basis.clone(),
        x_basis: xs.basis.clone(),
        components: comps,
        b_hat,
        omega_hat,
        lambda_means: lambda_c.col_means,
        pi_means: pi_c.col_means,
    })
}

/// `β̂(v, u) = ψ(v)ᵀ C φ(u)` with `C = Ψ^{-1/2} Ω̂ Φ^{-1/2}`.
#[derive(Debug, Clone)]
pub struct CoefficientSurface {
    /// `K_X x K_Y`.
    pub coeffs: DMatrix<f64>,
    pub x_basis: BSplineBasis,
    pub y_basis: BSplineBasis,
}

impl CoefficientSurface {
    /// Surface on the rectangular grid `vs x us` (rows follow `vs`).
    pub fn evaluate(&self, vs: &[f64], us: &[f64]) -> Result<DMatrix<f64>> {
        let psi = eval_basis(&self.x_basis, vs)?;
        let phi = eval_basis(&self.y_basis, us)?;
        Ok(psi * &self.coeffs * phi.transpose())
    }

    pub fn at(&self, v: f64, u: f64) -> Result<f64> {
        Ok(self.evaluate(&[v], &[u])?[(0, 0)])
    }
}

impl FpqrFit {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn coefficient_surface(&self) -> CoefficientSurface {
        let coeffs = self.x_basis.gram_invsqrt() * &self.omega_hat * self.y_basis.gram_invsqrt();
        CoefficientSurface {
            coeffs,
            x_basis: self.x_basis.clone(),
            y_basis: self.y_basis.clone(),
        }
    }

    /// Half-Gram coordinates of the intercept function.
    pub fn intercept_coords(&self) -> Vec<f64> {
        let shift = DMatrix::from_row_slice(1, self.pi_means.len(), &self.pi_means) * &self.omega_hat;
        (0..self.lambda_means.len())
            .map(|j| self.b_hat[(0, j)] + self.lambda_means[j] - shift[(0, j)])
            .collect()
    }

    /// Intercept function on the training response grid.
    pub fn intercept_function(&self) -> Vec<f64> {
        self.intercept_function_at(&self.y_grid).expect("training grid lies in the basis domain")
    }

    pub fn intercept_function_at(&self, points: &[f64]) -> Result<Vec<f64>> {
        from_half_coords(&self.intercept_coords(), &self.y_basis, points)
    }

    /// Predicted response half-Gram coordinates for predictor coordinates `delta` (`m x K_X`).
    pub fn predict_coords(&self, delta: &DMatrix<f64>) -> DMatrix<f64> {
        let mut centred = delta.clone();
        for (k, m) in self.pi_means.iter().enumerate() {
            centred.column_mut(k).add_scalar_mut(-m);
        }
        let mut out = centred * &self.omega_hat;
        for j in 0..out.ncols() {
            let shift = self.b_hat[(0, j)] + self.lambda_means[j];
            out.column_mut(j).add_scalar_mut(shift);
        }
        out
    }

    /// Half-Gram coordinates of new predictor curves.
    pub fn predictor_coords(&self, x_new: &DiscreteCurveSet) -> Result<DMatrix<f64>> {
        if !x_new.same_grid(&self.x_grid) {
            return invalid("predictor grid differs from the training grid");
        }
        Ok(to_half_coords(&smooth_curves(x_new, &self.x_basis)?, &self.x_basis, false)?.coords)
    }

    /// Predicted conditional quantile curves on the training response grid.
    pub fn predict(&self, x_new: &DiscreteCurveSet) -> Result<DiscreteCurveSet> {
        let coords = self.predict_coords(&self.predictor_coords(x_new)?);
        let values = curves_from_half_coords(&coords, &self.y_basis, &self.y_grid)?;
        DiscreteCurveSet::new(self.y_grid.clone(), values)
    }
}
