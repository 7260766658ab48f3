//! Check-loss quantile regression.
//!
//! The solver walks the vertices of the check-loss polytope: a vertex is a
//! set of `p` observations fitted exactly. From each vertex the `2p` edge
//! directions are priced by their one-sided directional derivative and the
//! steepest descending edge is followed with an exact line search (the loss
//! along an edge is convex piecewise linear, so the minimiser is a weighted
//! quantile of the crossing points). Every step strictly lowers the loss, so
//! the walk terminates at a global minimiser.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, FpqrError, Result};

/// A quantile level strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct QuantileLevel(f64);

impl QuantileLevel {
    pub fn new(tau: f64) -> Result<Self> {
        if tau > 0.0 && tau < 1.0 {
            Ok(Self(tau))
        } else {
            invalid(format!("quantile level must lie in (0,1), got {tau}"))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for QuantileLevel {
    type Error = crate::error::FpqrError;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<QuantileLevel> for f64 {
    fn from(t: QuantileLevel) -> f64 {
        t.0
    }
}

impl std::fmt::Display for QuantileLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Check (pinball) loss `x * (tau - 1{x < 0})`.
#[inline]
pub fn check_loss(residual: f64, tau: QuantileLevel) -> f64 {
    let t = tau.value();
    if residual < 0.0 {
        (t - 1.0) * residual
    } else {
        t * residual
    }
}

/// Result of a quantile regression fit.
#[derive(Debug, Clone)]
pub struct QregSolution {
    /// `p x q`; with an intercept the first row holds the intercepts.
    pub coefficients: DMatrix<f64>,
    /// Check loss at the returned coefficients, one per response column.
    pub achieved_loss: Vec<f64>,
    /// Total number of vertex pivots over all columns.
    pub iterations: usize,
    pub converged: bool,
}

/// Fits `response` on `design` (plus a leading ones column when `intercept`).
pub fn qreg_fit(
    design: &DMatrix<f64>,
    response: &[f64],
    tau: QuantileLevel,
    intercept: bool,
) -> Result<QregSolution> {
    let x = RowMajor::build(design, intercept)?;
    if response.len() != x.n {
        return invalid(format!("design has {} rows but response has {}", x.n, response.len()));
    }
    if response.iter().any(|v| !v.is_finite()) {
        return invalid("response has non-finite values");
    }
    let fit = solve_vertex(&x, response, tau)?;
    Ok(QregSolution {
        coefficients: DMatrix::from_column_slice(x.p, 1, &fit.coef),
        achieved_loss: vec![fit.loss],
        iterations: fit.iterations,
        converged: fit.converged,
    })
}

/// Column-separable fit of every response column on the same design.
pub fn qreg_fit_multi(
    design: &DMatrix<f64>,
    responses: &DMatrix<f64>,
    tau: QuantileLevel,
    intercept: bool,
) -> Result<QregSolution> {
    let x = RowMajor::build(design, intercept)?;
    if responses.nrows() != x.n {
        return invalid(format!(
            "design has {} rows but responses have {}",
            x.n,
            responses.nrows()
        ));
    }
    if responses.ncols() == 0 {
        return invalid("no response columns");
    }
    let fits: Vec<Result<VertexFit>> = (0..responses.ncols())
        .into_par_iter()
        .map(|j| {
            let y: Vec<f64> = responses.column(j).iter().copied().collect();
            if y.iter().any(|v| !v.is_finite()) {
                return invalid(format!("response column {j} has non-finite values"));
            }
            solve_vertex(&x, &y, tau).map_err(|e| match e {
                FpqrError::NumericalFailure(m) => {
                    FpqrError::NumericalFailure(format!("response column {j}: {m}"))
                }
                FpqrError::InvalidInput(m) => FpqrError::InvalidInput(format!("response column {j}: {m}")),
                other => other,
            })
        })
        .collect();

    let mut coefficients = DMatrix::zeros(x.p, responses.ncols());
    let mut achieved_loss = Vec::with_capacity(responses.ncols());
    let mut iterations = 0;
    let mut converged = true;
    for (j, fit) in fits.into_iter().enumerate() {
        let fit = fit?;
        coefficients.column_mut(j).copy_from_slice(&fit.coef);
        achieved_loss.push(fit.loss);
        iterations += fit.iterations;
        converged &= fit.converged;
    }
    Ok(QregSolution { coefficients, achieved_loss, iterations, converged })
}

/// Intercept and slope of the univariate quantile regression of `y` on `x`.
///
/// A constant `x` makes the design singular and yields a numerical failure.
pub fn qreg_simple(x: &[f64], y: &[f64], tau: QuantileLevel) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return invalid("qreg_simple: length mismatch");
    }
    let n = x.len();
    if n <= 2 {
        return invalid(format!("quantile regression needs n > p (n={n}, p=2)"));
    }
    let mut data = Vec::with_capacity(2 * n);
    for &xi in x {
        data.push(1.0);
        data.push(xi);
    }
    let design = RowMajor { n, p: 2, data };
    let fit = solve_vertex(&design, y, tau)?;
    Ok((fit.coef[0], fit.coef[1]))
}

/// Total check loss of `y - design * coef`.
pub fn total_check_loss(design: &DMatrix<f64>, coef: &[f64], y: &[f64], tau: QuantileLevel) -> f64 {
    (0..design.nrows())
        .map(|i| {
            let fitted: f64 = (0..design.ncols()).map(|k| design[(i, k)] * coef[k]).sum();
            check_loss(y[i] - fitted, tau)
        })
        .sum()
}

/// Dense row-major design, the layout the pivoting loop wants.
struct RowMajor {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl RowMajor {
    fn build(design: &DMatrix<f64>, intercept: bool) -> Result<Self> {
        let (n, cols) = design.shape();
        let p = cols + usize::from(intercept);
        if p == 0 {
            return invalid("design has no columns");
        }
        if n <= p {
            return invalid(format!("quantile regression needs n > p (n={n}, p={p})"));
        }
        if design.iter().any(|v| !v.is_finite()) {
            return invalid("design has non-finite values");
        }
        let mut data = Vec::with_capacity(n * p);
        for i in 0..n {
            if intercept {
                data.push(1.0);
            }
            for k in 0..cols {
                data.push(design[(i, k)]);
            }
        }
        Ok(Self { n, p, data })
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }
}

struct VertexFit {
    coef: Vec<f64>,
    loss: f64,
    iterations: usize,
    converged: bool,
}

/// Pivots between exact refreshes of the basis inverse.
const REFRESH_EVERY: usize = 32;

fn solve_vertex(x: &RowMajor, y: &[f64], tau: QuantileLevel) -> Result<VertexFit> {
    match x.p {
        1 => solve_vertex_dim::<1>(x, y, tau),
        2 => solve_vertex_dim::<2>(x, y, tau),
        3 => solve_vertex_dim::<3>(x, y, tau),
        4 => solve_vertex_dim::<4>(x, y, tau),
        5 => solve_vertex_dim::<5>(x, y, tau),
        6 => solve_vertex_dim::<6>(x, y, tau),
        _ => solve_vertex_dim::<0>(x, y, tau),
    }
}

/// `P > 0` fixes the column count at compile time so the inner loops unroll;
/// `P == 0` reads it from the design.
fn solve_vertex_dim<const P: usize>(x: &RowMajor, y: &[f64], tau: QuantileLevel) -> Result<VertexFit> {
    let n = x.n;
    let p = if P > 0 { P } else { x.p };
    let t = tau.value();

    let mut basis = initial_basis::<P>(x, y)?;
    let mut in_basis = vec![false; n];
    for &b in &basis {
        in_basis[b] = true;
    }

    // inv is X_B^{-1} row-major; c[i * p + j] = x_i · (column j of X_B^{-1}).
    let mut inv = vec![0.0; p * p];
    let mut coef = vec![0.0; p];
    let mut resid = vec![0.0; n];
    let mut c = vec![0.0; n * p];
    let mut breaks = vec![Breakpoint { step: 0.0, weight: 0.0, index: 0 }; n];

    let max_iter = 50 * n + 1000;
    let mut iterations = 0;
    let mut converged = false;
    let mut since_refresh = usize::MAX;

    loop {
        if since_refresh > 0 {
            refresh_vertex::<P>(x, y, &basis, &mut inv, &mut coef, &mut resid, &mut c)?;
            since_refresh = 0;
        }

        let Some((leave, sign, slope)) = steepest_edge::<P>(&c, &resid, &in_basis, p, t) else {
            if since_refresh == 0 {
                converged = true;
                break;
            }
            // Re-verify optimality against an exactly recomputed vertex.
            since_refresh = usize::MAX;
            continue;
        };
        if iterations == max_iter {
            break;
        }
        iterations += 1;

        // Crossings: residuals that reach zero at a positive step. Basis and
        // tied rows have zero residual and never qualify.
        let mut count = 0;
        for i in 0..n {
            let ci = sign * c[i * p + leave];
            let step = resid[i] / ci;
            breaks[count] = Breakpoint { step, weight: ci.abs(), index: i };
            count += usize::from(step > 0.0 && step.is_finite());
        }
        let Some(enter) = weighted_first_crossing(&mut breaks[..count], -slope) else {
            return Err(FpqrError::NumericalFailure("unbounded descent edge".into()));
        };

        // Move along the edge to the entering observation.
        let pivot = c[enter * p + leave];
        let step = resid[enter] / pivot;
        for k in 0..p {
            coef[k] += step * inv[k * p + leave];
        }
        for i in 0..n {
            resid[i] -= step * c[i * p + leave];
        }
        for &b in &basis {
            resid[b] = 0.0;
        }
        resid[basis[leave]] = -step;
        resid[enter] = 0.0;

        // Rank-one update of the inverse and of the edge products.
        let ce: Vec<f64> = c[enter * p..(enter + 1) * p].to_vec();
        for k in 0..p {
            let col_l = inv[k * p + leave] / pivot;
            for j in 0..p {
                if j != leave {
                    inv[k * p + j] -= col_l * ce[j];
                }
            }
            inv[k * p + leave] = col_l;
        }
        for i in 0..n {
            let row = &mut c[i * p..(i + 1) * p];
            let col_l = row[leave] / pivot;
            for j in 0..p {
                if j != leave {
                    row[j] -= col_l * ce[j];
                }
            }
            row[leave] = col_l;
        }

        in_basis[basis[leave]] = false;
        in_basis[enter] = true;
        basis[leave] = enter;
        since_refresh += 1;
        if since_refresh >= REFRESH_EVERY {
            since_refresh = usize::MAX;
        }
    }

    if since_refresh > 0 {
        refresh_vertex::<P>(x, y, &basis, &mut inv, &mut coef, &mut resid, &mut c)?;
    }
    let loss = resid.iter().map(|&r| check_loss(r, tau)).sum();
    Ok(VertexFit { coef, loss, iterations, converged })
}

/// Steepest descending edge as (basis position, direction sign, slope).
///
/// The slope along `±d_j` is linear in the edge products for observations
/// with nonzero residual; zero-residual observations off the basis (ties)
/// contribute their one-sided terms separately.
fn steepest_edge<const P: usize>(
    c: &[f64],
    resid: &[f64],
    in_basis: &[bool],
    p: usize,
    t: f64,
) -> Option<(usize, f64, f64)> {
    let n = resid.len();
    let p = if P > 0 { P } else { p };
    let mut sums = [0.0f64; 8];
    let mut scales = [0.0f64; 8];
    let mut sums_dyn = Vec::new();
    let mut scales_dyn = Vec::new();
    let (sums, scales): (&mut [f64], &mut [f64]) = if p <= 8 {
        (&mut sums[..p], &mut scales[..p])
    } else {
        sums_dyn.resize(p, 0.0);
        scales_dyn.resize(p, 0.0);
        (&mut sums_dyn[..], &mut scales_dyn[..])
    };
    let mut ties = false;
    for i in 0..n {
        let r = resid[i];
        let psi = if r > 0.0 { t } else { 0.0 } + if r < 0.0 { t - 1.0 } else { 0.0 };
        ties |= r == 0.0 && !in_basis[i];
        let row = &c[i * p..(i + 1) * p];
        for j in 0..p {
            sums[j] += psi * row[j];
            scales[j] += row[j].abs();
        }
    }
    let mut best: Option<(usize, f64, f64)> = None;
    for j in 0..p {
        let mut plus = (1.0 - t) - sums[j];
        let mut minus = t + sums[j];
        if ties {
            for i in 0..n {
                if resid[i] == 0.0 && !in_basis[i] {
                    let ci = c[i * p + j];
                    plus += ((1.0 - t) * ci).max(-t * ci);
                    minus += (t * ci).max(-(1.0 - t) * ci);
                }
            }
        }
        let tol = -1e-12 * (1.0 + scales[j]);
        for (sign, slope) in [(1.0, plus), (-1.0, minus)] {
            if slope < tol && best.is_none_or(|(_, _, s)| slope < s) {
                best = Some((j, sign, slope));
            }
        }
    }
    best
}

/// Recomputes the inverse, coefficients, residuals and edge products exactly.
fn refresh_vertex<const P: usize>(
    x: &RowMajor,
    y: &[f64],
    basis: &[usize],
    inv: &mut [f64],
    coef: &mut [f64],
    resid: &mut [f64],
    c: &mut [f64],
) -> Result<()> {
    let p = if P > 0 { P } else { x.p };
    let mut a = vec![0.0; p * p];
    for (r, &b) in basis.iter().enumerate() {
        a[r * p..(r + 1) * p].copy_from_slice(x.row(b));
    }
    invert_small(&mut a, inv, p)?;
    for k in 0..p {
        coef[k] = (0..p).map(|r| inv[k * p + r] * y[basis[r]]).sum();
    }
    for i in 0..x.n {
        let row = x.row(i);
        resid[i] = y[i] - (0..p).map(|k| row[k] * coef[k]).sum::<f64>();
        let ci = &mut c[i * p..(i + 1) * p];
        for j in 0..p {
            ci[j] = (0..p).map(|k| row[k] * inv[k * p + j]).sum();
        }
    }
    for &b in basis {
        resid[b] = 0.0;
    }
    Ok(())
}

#[derive(Clone, Copy)]
struct Breakpoint {
    step: f64,
    weight: f64,
    index: usize,
}

/// Smallest step at which the accumulated crossing weight reaches `target`.
fn weighted_first_crossing(items: &mut [Breakpoint], mut target: f64) -> Option<usize> {
    if items.is_empty() {
        return None;
    }
    let mut lo = 0;
    let mut hi = items.len();
    loop {
        let slice = &mut items[lo..hi];
        if slice.len() == 1 {
            return Some(slice[0].index);
        }
        let k = slice.len() / 2;
        slice.select_nth_unstable_by(k, |a, b| a.step.total_cmp(&b.step));
        let lower: f64 = slice[..k].iter().map(|b| b.weight).sum();
        if lower >= target {
            hi = lo + k;
        } else if lower + slice[k].weight >= target {
            return Some(slice[k].index);
        } else {
            target -= lower + slice[k].weight;
            if k + 1 == slice.len() {
                // Only reachable through rounding: take the farthest crossing.
                return Some(slice[k].index);
            }
            lo += k + 1;
        }
    }
}

/// Picks `p` linearly independent rows, preferring small least-squares residuals.
fn initial_basis<const P: usize>(x: &RowMajor, y: &[f64]) -> Result<Vec<usize>> {
    let n = x.n;
    let p = if P > 0 { P } else { x.p };
    let mut order: Vec<usize> = (0..n).collect();
    if let Some(b) = normal_equations::<P>(x, y) {
        let r: Vec<f64> = (0..n)
            .map(|i| {
                let row = x.row(i);
                (y[i] - (0..p).map(|k| row[k] * b[k]).sum::<f64>()).abs()
            })
            .collect();
        let by_resid = |a: &usize, b: &usize| r[*a].total_cmp(&r[*b]).then(a.cmp(b));
        // Usually the first few candidates suffice; sort the rest only if needed.
        let head = (4 * p).min(n - 1);
        order.select_nth_unstable_by(head, by_resid);
        order[..head].sort_by(by_resid);
        if let Some(chosen) = independent_rows(x, &order[..head]) {
            return Ok(chosen);
        }
        order.sort_by(by_resid);
    }
    independent_rows(x, &order)
        .ok_or_else(|| FpqrError::NumericalFailure("singular design: no nonsingular basis".into()))
}

/// Greedy Gram-Schmidt over candidate rows.
fn independent_rows(x: &RowMajor, candidates: &[usize]) -> Option<Vec<usize>> {
    let p = x.p;
    let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut chosen = Vec::with_capacity(p);
    for &i in candidates {
        let row = x.row(i);
        let norm0 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm0 == 0.0 {
            continue;
        }
        let mut v = row.to_vec();
        for q in &ortho {
            let d: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 * norm0 {
            v.iter_mut().for_each(|a| *a /= norm);
            ortho.push(v);
            chosen.push(i);
            if chosen.len() == p {
                return Some(chosen);
            }
        }
    }
    None
}

/// Least-squares start via the normal equations; `None` when singular.
fn normal_equations<const P: usize>(x: &RowMajor, y: &[f64]) -> Option<Vec<f64>> {
    let p = if P > 0 { P } else { x.p };
    let mut gram = vec![0.0; p * p];
    let mut rhs = vec![0.0; p];
    for i in 0..x.n {
        let row = x.row(i);
        for a in 0..p {
            rhs[a] += row[a] * y[i];
            for b in a..p {
                gram[a * p + b] += row[a] * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[a * p + b] = gram[b * p + a];
        }
    }
    let mut inv = vec![0.0; p * p];
    invert_small(&mut gram, &mut inv, p).ok()?;
    Some((0..p).map(|a| (0..p).map(|b| inv[a * p + b] * rhs[b]).sum()).collect())
}

/// Gauss-Jordan inversion with partial pivoting of a row-major `p x p` matrix.
fn invert_small(a: &mut [f64], inv: &mut [f64], p: usize) -> Result<()> {
    inv.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..p {
        inv[i * p + i] = 1.0;
    }
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..p {
        let mut piv = col;
        for r in (col + 1)..p {
            if a[r * p + col].abs() > a[piv * p + col].abs() {
                piv = r;
            }
        }
        let pv = a[piv * p + col];
        if pv.abs() <= 1e-14 * scale || pv == 0.0 {
            return Err(FpqrError::NumericalFailure("singular basis matrix".into()));
        }
        if piv != col {
            for k in 0..p {
                a.swap(piv * p + k, col * p + k);
                inv.swap(piv * p + k, col * p + k);
            }
        }
        let d = 1.0 / pv;
        for k in 0..p {
            a[col * p + k] *= d;
            inv[col * p + k] *= d;
        }
        for r in 0..p {
            if r == col {
                continue;
            }
            let f = a[r * p + col];
            if f == 0.0 {
                continue;
            }
            for k in 0..p {
                a[r * p + k] -= f * a[col * p + k];
                inv[r * p + k] -= f * inv[col * p + k];
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::solve_ls;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q(t: f64) -> QuantileLevel {
        QuantileLevel::new(t).unwrap()
    }

    #[test]
    fn check_loss_values() {
        assert_eq!(check_loss(0.0, q(0.3)), 0.0);
        assert!((check_loss(-2.0, q(0.25)) - 1.5).abs() < 1e-15);
        assert!((check_loss(3.0, q(0.9)) - 2.7).abs() < 1e-12);
    }

    #[test]
    fn quantile_level_bounds() {
        assert!(QuantileLevel::new(0.0).is_err());
        assert!(QuantileLevel::new(1.0).is_err());
        assert!(QuantileLevel::new(f64::NAN).is_err());
        assert!(QuantileLevel::new(0.5).is_ok());
    }

    #[test]
    fn intercept_only_median() {
        let y = [1.0, 2.0, 3.0, 10.0];
        let design = DMatrix::<f64>::zeros(4, 0);
        let sol = qreg_fit(&design, &y, q(0.5), true).unwrap();
        let at_median: f64 = y.iter().map(|v| check_loss(v - 2.5, q(0.5))).sum();
        assert!(sol.achieved_loss[0] <= at_median + 1e-8);
        assert!(sol.converged);
    }

    #[test]
    fn noiseless_line() {
        let x = DMatrix::from_fn(15, 1, |i, _| i as f64 * 0.3 - 1.0);
        let y: Vec<f64> = (0..15).map(|i| 2.0 * x[(i, 0)]).collect();
        for t in [0.1, 0.5, 0.9] {
            let sol = qreg_fit(&x, &y, q(t), true).unwrap();
            assert!(sol.coefficients[(0, 0)].abs() < 1e-6);
            assert!((sol.coefficients[(1, 0)] - 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn intercept_only_matches_order_statistic_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let y: Vec<f64> = (0..20).map(|_| rng.random_range(-3.0..5.0)).collect();
        let tau = q(0.9);
        let best = y
            .iter()
            .map(|&c| y.iter().map(|v| check_loss(v - c, tau)).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        let sol = qreg_fit(&DMatrix::zeros(20, 0), &y, tau, true).unwrap();
        assert!((sol.achieved_loss[0] - best).abs() <= 1e-8);
    }

    #[test]
    fn multi_matches_single_and_duplicates() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = DMatrix::from_fn(30, 2, |_, _| rng.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
        let single = qreg_fit(&x, &y, q(0.3), true).unwrap();
        let ys = DMatrix::from_fn(30, 2, |i, _| y[i]);
        let multi = qreg_fit_multi(&x, &ys, q(0.3), true).unwrap();
        assert_eq!(multi.coefficients.column(0), single.coefficients.column(0));
        assert_eq!(multi.coefficients.column(0), multi.coefficients.column(1));
    }

    #[test]
    fn multi_recovers_exact_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = DMatrix::from_fn(25, 3, |_, _| rng.random_range(-1.0..1.0));
        let b = DMatrix::from_fn(3, 4, |_, _| rng.random_range(-2.0..2.0));
        let y = &x * &b;
        let sol = qreg_fit_multi(&x, &y, q(0.7), false).unwrap();
        assert!((sol.coefficients - b).amax() < 1e-6);
    }

    #[test]
    fn loss_dominates_ols() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = DMatrix::from_fn(40, 2, |_, _| rng.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..40).map(|i| x[(i, 0)] - x[(i, 1)] + rng.random_range(-1.0..1.0)).collect();
        let mut d = DMatrix::from_element(40, 3, 1.0);
        d.view_mut((0, 1), (40, 2)).copy_from(&x);
        let ols = solve_ls(&d, &DMatrix::from_column_slice(40, 1, &y)).unwrap();
        for t in [0.2, 0.5, 0.8] {
            let sol = qreg_fit(&x, &y, q(t), true).unwrap();
            let ols_loss = total_check_loss(&d, ols.as_slice(), &y, q(t));
            assert!(sol.achieved_loss[0] <= ols_loss + 1e-12);
        }
    }

    #[test]
    fn intercept_monotone_in_tau() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let y: Vec<f64> = (0..31).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut prev = f64::NEG_INFINITY;
        for t in [0.05, 0.2, 0.4, 0.5, 0.6, 0.8, 0.95] {
            let sol = qreg_fit(&DMatrix::zeros(31, 0), &y, q(t), true).unwrap();
            assert!(sol.coefficients[(0, 0)] >= prev);
            prev = sol.coefficients[(0, 0)];
        }
    }

    #[test]
    fn errors() {
        let x = DMatrix::from_fn(3, 3, |i, j| (i + j) as f64);
        assert!(matches!(qreg_fit(&x, &[1.0, 2.0, 3.0], q(0.5), false), Err(FpqrError::InvalidInput(_))));
        let x = DMatrix::from_fn(6, 2, |i, _| i as f64);
        let y = [0.0, 1.0, 0.0, 1.0, 2.0, 1.0];
        assert!(matches!(qreg_fit(&x, &y, q(0.5), false), Err(FpqrError::NumericalFailure(_))));
    }

    #[test]
    fn simple_matches_general() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v + rng.random_range(-1.0..1.0)).collect();
        let (a, b) = qreg_simple(&x, &y, q(0.4)).unwrap();
        let sol = qreg_fit(&DMatrix::from_column_slice(50, 1, &x), &y, q(0.4), true).unwrap();
        assert_eq!(a, sol.coefficients[(0, 0)]);
        assert_eq!(b, sol.coefficients[(1, 0)]);
    }
}
