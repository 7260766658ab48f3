//! B-spline bases, least-squares curve smoothing and half-Gram coordinates.
//!
//! A curve `x(t) = c^T b(t)` with basis Gram matrix `G` has L² norm
//! `c^T G c`. Post-multiplying coefficient rows by `G^{1/2}` gives
//! coordinates whose Euclidean geometry matches the L² geometry of the
//! curves, which is what the component extraction works in.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};
use crate::numerics::{solve_ls, sym_eigen, sym_sqrt_invsqrt, SymMatrix, GRAM_FLOOR_REL};

/// Curves sampled on a shared, strictly increasing grid (`n x J` values).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCurveSet {
    grid: Vec<f64>,
    values: DMatrix<f64>,
}

impl DiscreteCurveSet {
    pub fn new(grid: Vec<f64>, values: DMatrix<f64>) -> Result<Self> {
        if grid.len() < 4 {
            return invalid(format!("grid needs at least 4 points, got {}", grid.len()));
        }
        if grid.iter().any(|v| !v.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("grid must be finite and strictly increasing");
        }
        if values.nrows() == 0 {
            return invalid("curve set has no curves");
        }
        if values.ncols() != grid.len() {
            return invalid(format!(
                "curves have {} points but grid has {}",
                values.ncols(),
                grid.len()
            ));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % values.nrows(), pos / values.nrows());
            return invalid(format!("non-finite value at curve {r}, point {c}"));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_curves(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_points(&self) -> usize {
        self.grid.len()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.grid[0], self.grid[self.grid.len() - 1])
    }

    /// Curves at the given row indices, in that order.
    pub fn select(&self, rows: &[usize]) -> Self {
        let values = DMatrix::from_fn(rows.len(), self.n_points(), |i, j| self.values[(rows[i], j)]);
        Self { grid: self.grid.clone(), values }
    }

    /// Whether `other` is sampled on exactly this grid.
    pub fn same_grid(&self, other: &[f64]) -> bool {
        self.grid.len() == other.len() && self.grid.iter().zip(other).all(|(a, b)| a == b)
    }
}

/// Clamped B-spline basis with uniformly spaced interior knots.
#[derive(Debug, Clone)]
pub struct BSplineBasis {
    lower: f64,
    upper: f64,
    order: usize,
    num_basis: usize,
    knots: Vec<f64>,
    gram: SymMatrix,
    gram_sqrt: SymMatrix,
    gram_invsqrt: SymMatrix,
}

/// Default spline order (cubic).
pub const DEFAULT_ORDER: usize = 4;

/// Builds a clamped basis of `num_basis` functions of the given order on `[a, b]`.
pub fn make_basis(domain: (f64, f64), num_basis: usize, order: usize) -> Result<BSplineBasis> {
    let (a, b) = domain;
    if !(a.is_finite() && b.is_finite() && b > a) {
        return invalid(format!("degenerate domain [{a}, {b}]"));
    }
    if order < 2 {
        return invalid(format!("spline order must be >= 2, got {order}"));
    }
    if num_basis < order {
        return invalid(format!("number of basis functions {num_basis} is below the order {order}"));
    }
    let interior = num_basis - order;
    let mut knots = Vec::with_capacity(num_basis + order);
    knots.extend(std::iter::repeat_n(a, order));
    for k in 1..=interior {
        knots.push(a + (b - a) * k as f64 / (interior + 1) as f64);
    }
    knots.extend(std::iter::repeat_n(b, order));

    let mut basis = BSplineBasis {
        lower: a,
        upper: b,
        order,
        num_basis,
        knots,
        gram: SymMatrix::identity(num_basis),
        gram_sqrt: SymMatrix::identity(num_basis),
        gram_invsqrt: SymMatrix::identity(num_basis),
    };
    let gram = basis.compute_gram()?;
    let top = sym_eigen(&gram)?.values[0];
    let (root, inv_root) = sym_sqrt_invsqrt(&gram, GRAM_FLOOR_REL * top)?;
    basis.gram = gram;
    basis.gram_sqrt = root;
    basis.gram_invsqrt = inv_root;
    Ok(basis)
}

impl BSplineBasis {
    pub fn domain(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn num_basis(&self) -> usize {
        self.num_basis
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        self.gram.matrix()
    }

    pub fn gram_sqrt(&self) -> &DMatrix<f64> {
        self.gram_sqrt.matrix()
    }

    pub fn gram_invsqrt(&self) -> &DMatrix<f64> {
        self.gram_invsqrt.matrix()
    }

    /// Index `s` of the knot span `[knots[s], knots[s+1])` containing `t`;
    /// the right endpoint belongs to the last nonempty span.
    fn span(&self, t: f64) -> usize {
        let last = self.num_basis - 1;
        if t >= self.knots[last + 1] {
            return last;
        }
        let (mut lo, mut hi) = (self.order - 1, last + 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if t < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// The `order` nonzero basis values at `t` and the index of the first one.
    fn nonzero_at(&self, t: f64, out: &mut [f64]) -> usize {
        let k = self.order;
        let s = self.span(t);
        let mut left = vec![0.0; k];
        let mut right = vec![0.0; k];
        out[0] = 1.0;
        for j in 1..k {
            left[j] = t - self.knots[s + 1 - j];
            right[j] = self.knots[s + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom == 0.0 { 0.0 } else { out[r] / denom };
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
        s + 1 - k
    }

    fn check_point(&self, t: f64) -> Result<f64> {
        let tol = 1e-10 * (self.upper - self.lower);
        if !t.is_finite() || t < self.lower - tol || t > self.upper + tol {
            return invalid(format!(
                "point {t} outside basis domain [{}, {}]",
                self.lower, self.upper
            ));
        }
        Ok(t.clamp(self.lower, self.upper))
    }

    fn compute_gram(&self) -> Result<SymMatrix> {
        let k = self.num_basis;
        let (nodes, weights) = gauss_legendre(self.order);
        let mut gram = DMatrix::<f64>::zeros(k, k);
        let mut vals = vec![0.0; self.order];
        for s in (self.order - 1)..k {
            let (lo, hi) = (self.knots[s], self.knots[s + 1]);
            if hi <= lo {
                continue;
            }
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (x, w) in nodes.iter().zip(&weights) {
                let t = mid + half * x;
                let first = self.nonzero_at(t, &mut vals);
                for a in 0..self.order {
                    for b in 0..self.order {
                        gram[(first + a, first + b)] += w * half * vals[a] * vals[b];
                    }
                }
            }
        }
        SymMatrix::new(gram)
    }
}

/// `J x K` matrix of basis values at `points`.
pub fn eval_basis(basis: &BSplineBasis, points: &[f64]) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(points.len(), basis.num_basis);
    let mut vals = vec![0.0; basis.order];
    for (j, &t) in points.iter().enumerate() {
        let t = basis.check_point(t)?;
        let first = basis.nonzero_at(t, &mut vals);
        for (a, v) in vals.iter().enumerate() {
            out[(j, first + a)] = *v;
        }
    }
    Ok(out)
}

/// Per-curve least-squares basis coefficients (`n x K`).
pub fn smooth_curves(curves: &DiscreteCurveSet, basis: &BSplineBasis) -> Result<DMatrix<f64>> {
    if curves.n_points() < basis.num_basis {
        return invalid(format!(
            "cannot smooth {} grid points onto {} basis functions",
            curves.n_points(),
            basis.num_basis
        ));
    }
    let design = eval_basis(basis, curves.grid())?;
    Ok(solve_ls(&design, &curves.values.transpose())?.transpose())
}

/// Half-Gram coordinates of curves, optionally column-centred.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffMatrix {
    pub coords: DMatrix<f64>,
    /// Means removed from each column (zeros when not centred).
    pub col_means: Vec<f64>,
    pub centered: bool,
}

impl CoeffMatrix {
    /// Coordinates with the stored column means added back.
    pub fn uncentered(&self) -> DMatrix<f64> {
        let mut out = self.coords.clone();
        for (j, m) in self.col_means.iter().enumerate() {
            out.column_mut(j).add_scalar_mut(*m);
        }
        out
    }
}

/// `raw * G^{1/2}`, with columns centred when `center` is set.
pub fn to_half_coords(raw: &DMatrix<f64>, basis: &BSplineBasis, center: bool) -> Result<CoeffMatrix> {
    if raw.ncols() != basis.num_basis {
        return invalid(format!(
            "coefficient matrix has {} columns, basis has {}",
            raw.ncols(),
            basis.num_basis
        ));
    }
    let coords = raw * basis.gram_sqrt();
    Ok(center_columns(coords, center))
}

pub(crate) fn center_columns(mut coords: DMatrix<f64>, center: bool) -> CoeffMatrix {
    let k = coords.ncols();
    let mut col_means = vec![0.0; k];
    if center && coords.nrows() > 0 {
        for j in 0..k {
            let m = coords.column(j).mean();
            coords.column_mut(j).add_scalar_mut(-m);
            col_means[j] = m;
        }
    }
    CoeffMatrix { coords, col_means, centered: center }
}

/// Values at `points` of the curve whose half-Gram coordinates are `coords_row`.
pub fn from_half_coords(coords_row: &[f64], basis: &BSplineBasis, points: &[f64]) -> Result<Vec<f64>> {
    let rows = DMatrix::from_row_slice(1, coords_row.len(), coords_row);
    let out = curves_from_half_coords(&rows, basis, points)?;
    Ok(out.row(0).iter().copied().collect())
}

/// Row-wise [`from_half_coords`] for an `n x K` coordinate matrix.
pub fn curves_from_half_coords(
    coords: &DMatrix<f64>,
    basis: &BSplineBasis,
    points: &[f64],
) -> Result<DMatrix<f64>> {
    if coords.ncols() != basis.num_basis {
        return invalid(format!(
            "coordinates have {} columns, basis has {}",
            coords.ncols(),
            basis.num_basis
        ));
    }
    let design = eval_basis(basis, points)?;
    Ok(coords * basis.gram_invsqrt() * design.transpose())
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration.
pub(crate) fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut deriv = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 1 { x } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            deriv = m as f64 * (x * pm - pm1) / (x * x - 1.0);
            let dx = pm / deriv;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * deriv * deriv);
    }
    (nodes, weights)
}

/// Squared L² norms of the curves `coords_row^T G^{-1/2} b(t)`, i.e. the
/// squared Euclidean norms of the coordinate rows.
pub fn half_coord_sq_norms(coords: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(coords.nrows(), coords.row_iter().map(|r| r.norm_squared()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct Cox-de Boor recursion, independent of the triangular scheme.
    fn cox_de_boor(knots: &[f64], i: usize, k: usize, t: f64, last_span: usize) -> f64 {
        if k == 1 {
            let inside = knots[i] <= t && t < knots[i + 1];
            let at_end = i == last_span && t == knots[i + 1];
            return if inside || at_end { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        let d1 = knots[i + k - 1] - knots[i];
        if d1 > 0.0 {
            v += (t - knots[i]) / d1 * cox_de_boor(knots, i, k - 1, t, last_span);
        }
        let d2 = knots[i + k] - knots[i + 1];
        if d2 > 0.0 {
            v += (knots[i + k] - t) / d2 * cox_de_boor(knots, i + 1, k - 1, t, last_span);
        }
        v
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
        let h = (b - a) / m as f64;
        let mut s = f(a) + f(b);
        for i in 1..m {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn bernstein_endpoint() {
        let b = make_basis((0.0, 1.0), 4, 4).unwrap();
        let e = eval_basis(&b, &[0.0, 1.0]).unwrap();
        assert_eq!(e.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(e.row(1).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn partition_of_unity_and_sparsity() {
        let b = make_basis((-1.0, 2.0), 9, 4).unwrap();
        let pts: Vec<f64> = (0..=300).map(|i| -1.0 + 3.0 * i as f64 / 300.0).collect();
        let e = eval_basis(&b, &pts).unwrap();
        for r in e.row_iter() {
            assert!((r.sum() - 1.0).abs() <= 1e-12);
            assert!(r.iter().all(|v| *v >= 0.0));
            assert!(r.iter().filter(|v| **v != 0.0).count() <= 4);
        }
    }

    #[test]
    fn matches_direct_recursion() {
        let b = make_basis((0.0, 1.0), 5, 4).unwrap();
        let e = eval_basis(&b, &[0.5, 0.13, 1.0]).unwrap();
        for (row, t) in [0.5, 0.13, 1.0].iter().enumerate() {
            for i in 0..5 {
                let direct = cox_de_boor(b.knots(), i, 4, *t, 4);
                assert!((e[(row, i)] - direct).abs() < 1e-14, "t={t} i={i}");
            }
        }
    }

    #[test]
    fn gram_matches_simpson() {
        let b = make_basis((0.0, 1.0), 8, 4).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let f = |t: f64| {
                    let e = eval_basis(&b, &[t]).unwrap();
                    e[(0, i)] * e[(0, j)]
                };
                let s = simpson(f, 0.0, 1.0, 10_000);
                assert!((b.gram()[(i, j)] - s).abs() <= 1e-8, "({i},{j})");
            }
        }
    }

    #[test]
    fn gram_roots_reconstruct() {
        let b = make_basis((0.0, 1.0), 8, 4).unwrap();
        assert!((b.gram_sqrt() * b.gram_sqrt() - b.gram()).amax() <= 1e-8);
        let id = b.gram_sqrt() * b.gram_invsqrt();
        assert!((id - DMatrix::<f64>::identity(8, 8)).amax() <= 1e-8);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(make_basis((0.0, 1.0), 3, 4).is_err());
        assert!(make_basis((1.0, 1.0), 6, 4).is_err());
        let b = make_basis((0.0, 1.0), 6, 4).unwrap();
        assert!(eval_basis(&b, &[1.5]).is_err());
        let curves = DiscreteCurveSet::new(vec![0.0, 0.3, 0.6, 1.0], DMatrix::zeros(2, 4)).unwrap();
        assert!(smooth_curves(&curves, &b).is_err());
    }

    #[test]
    fn curve_set_validation() {
        assert!(DiscreteCurveSet::new(vec![0.0, 1.0, 0.5, 2.0], DMatrix::zeros(1, 4)).is_err());
        assert!(DiscreteCurveSet::new(vec![0.0, 1.0, 2.0], DMatrix::zeros(1, 3)).is_err());
        let mut v = DMatrix::zeros(1, 4);
        v[(0, 2)] = f64::NAN;
        assert!(DiscreteCurveSet::new(vec![0.0, 1.0, 2.0, 3.0], v).is_err());
    }

    #[test]
    fn smoothing_recovers_in_span_curves() {
        let b = make_basis((0.0, 1.0), 7, 4).unwrap();
        let grid: Vec<f64> = (0..40).map(|i| i as f64 / 39.0).collect();
        let design = eval_basis(&b, &grid).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let coef = DMatrix::from_fn(3, 7, |_, _| rng.random_range(-2.0..2.0));
        let curves = DiscreteCurveSet::new(grid.clone(), &coef * design.transpose()).unwrap();
        let raw = smooth_curves(&curves, &b).unwrap();
        assert!((raw - &coef).amax() <= 1e-8);

        let consts = DiscreteCurveSet::new(grid.clone(), DMatrix::from_element(1, 40, 2.5)).unwrap();
        let raw = smooth_curves(&consts, &b).unwrap();
        assert!(raw.iter().all(|v| (v - 2.5).abs() < 1e-10));

        let zero = DiscreteCurveSet::new(grid, DMatrix::zeros(1, 40)).unwrap();
        assert!(smooth_curves(&zero, &b).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn smoothing_is_a_projection() {
        let b = make_basis((0.0, 1.0), 6, 4).unwrap();
        let grid: Vec<f64> = (0..30).map(|i| i as f64 / 29.0).collect();
        let vals = DMatrix::from_fn(2, 30, |i, j| ((i + 1) as f64 * grid[j] * 7.0).sin());
        let curves = DiscreteCurveSet::new(grid.clone(), vals).unwrap();
        let raw = smooth_curves(&curves, &b).unwrap();
        let design = eval_basis(&b, &grid).unwrap();
        let fitted = &raw * design.transpose();
        // residual orthogonal to the basis columns
        let resid = curves.values() - &fitted;
        assert!((resid * &design).amax() <= 1e-8);
        let again = smooth_curves(&DiscreteCurveSet::new(grid, fitted).unwrap(), &b).unwrap();
        assert!((again - raw).amax() <= 1e-10);
    }

    #[test]
    fn half_coords_isometry_and_round_trip() {
        let b = make_basis((0.0, 2.0), 8, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let raw = DMatrix::from_fn(4, 8, |_, _| rng.random_range(-1.0..1.0));
        let half = to_half_coords(&raw, &b, false).unwrap();
        for i in 0..4 {
            let row = raw.row(i).clone_owned();
            let f = |t: f64| {
                let e = eval_basis(&b, &[t]).unwrap();
                let v = (&row * e.transpose())[(0, 0)];
                v * v
            };
            let l2 = simpson(f, 0.0, 2.0, 20_000);
            let e2 = half.coords.row(i).norm_squared();
            assert!((l2 - e2).abs() <= 1e-8 * l2.max(1.0));
        }

        let centered = to_half_coords(&raw, &b, true).unwrap();
        for j in 0..8 {
            assert!(centered.coords.column(j).mean().abs() <= 1e-10);
        }
        assert!((centered.uncentered() - &half.coords).amax() <= 1e-14);

        let grid: Vec<f64> = (0..25).map(|i| 2.0 * i as f64 / 24.0).collect();
        let direct = &raw * eval_basis(&b, &grid).unwrap().transpose();
        let back = curves_from_half_coords(&half.coords, &b, &grid).unwrap();
        assert!((back - direct).amax() <= 1e-8);
    }

    #[test]
    fn half_coords_trivial_cases() {
        let b = make_basis((0.0, 1.0), 5, 4).unwrap();
        let zero = from_half_coords(&[0.0; 5], &b, &[0.0, 0.5, 1.0]).unwrap();
        assert!(zero.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(4);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(6)).sum();
        assert!((integral - 2.0 / 7.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }
}
