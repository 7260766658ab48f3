//! Small dense symmetric linear algebra kernels.
//!
//! Everything here works on matrices of at most a few dozen rows and columns
//! (basis dimensions), so the algorithms favour robustness and reproducibility
//! over asymptotic speed.

use nalgebra::DMatrix;

use crate::error::{invalid, FpqrError, Result};

/// Relative off-diagonal Frobenius tolerance for the Jacobi sweeps.
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;
/// Relative symmetry tolerance accepted by [`SymMatrix::new`].
const SYMMETRY_TOL: f64 = 1e-12;
/// Eigenvalue floor used for Gram matrix roots, relative to the largest eigenvalue.
pub const GRAM_FLOOR_REL: f64 = 1e-10;

/// A finite, symmetric square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Validates symmetry (relative to the largest entry) and finiteness, then
    /// stores the exactly symmetrised matrix.
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return invalid(format!("matrix is {}x{}, expected square", a.nrows(), a.ncols()));
        }
        if a.nrows() == 0 {
            return invalid("empty matrix");
        }
        if a.iter().any(|v| !v.is_finite()) {
            return invalid("matrix has non-finite entries");
        }
        let scale = a.amax().max(f64::MIN_POSITIVE);
        let n = a.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                if (a[(i, j)] - a[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return invalid(format!("matrix not symmetric at ({i},{j})"));
                }
            }
        }
        let sym = (&a + a.transpose()) * 0.5;
        Ok(Self(sym))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// Eigenvalues sorted descending with matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigenDecomp {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenDecomp {
    /// Eigenvector of the largest eigenvalue.
    pub fn leading_vector(&self) -> Vec<f64> {
        self.vectors.column(0).iter().copied().collect()
    }
}

/// Full symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Eigenvalues come back in descending order. Each eigenvector is oriented so
/// that its largest-magnitude entry (lowest index on ties) is nonnegative.
pub fn sym_eigen(a: &SymMatrix) -> Result<EigenDecomp> {
    let n = a.dim();
    let mut m = a.matrix().clone();
    let mut v = DMatrix::<f64>::identity(n, n);

    let total = m.norm();
    let off_norm = |m: &DMatrix<f64>| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[(i, j)] * m[(i, j)];
                }
            }
        }
        s.sqrt()
    };

    let mut converged = total == 0.0 || off_norm(&m) <= JACOBI_TOL * total;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(FpqrError::NumericalFailure(format!(
                "Jacobi eigen solver did not converge in {JACOBI_MAX_SWEEPS} sweeps"
            )));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                // A <- Jᵀ A J on rows/columns p and q.
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        converged = off_norm(&m) <= JACOBI_TOL * total;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]).then(i.cmp(&j)));

    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col: Vec<f64> = v.column(src).iter().copied().collect();
        orient(&mut col);
        for (k, x) in col.into_iter().enumerate() {
            vectors[(k, dst)] = x;
        }
    }
    Ok(EigenDecomp { values, vectors })
}

/// Flips `v` so its largest-magnitude entry (first on ties) is nonnegative.
fn orient(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Symmetric square root and inverse square root of a PSD matrix.
///
/// Eigenvalues below `floor` are clamped to `floor`; an eigenvalue below
/// `-floor` is reported as [`FpqrError::NotPsd`].
pub fn sym_sqrt_invsqrt(a: &SymMatrix, floor: f64) -> Result<(SymMatrix, SymMatrix)> {
    if !(floor > 0.0) {
        return invalid("eigenvalue floor must be positive");
    }
    let eig = sym_eigen(a)?;
    if let Some(&bad) = eig.values.iter().find(|&&l| l < -floor) {
        return Err(FpqrError::NotPsd { eigenvalue: bad, floor });
    }
    let n = a.dim();
    let mut root = DMatrix::<f64>::zeros(n, n);
    let mut inv_root = DMatrix::<f64>::zeros(n, n);
    for (k, &lambda) in eig.values.iter().enumerate() {
        let l = lambda.max(floor);
        let s = l.sqrt();
        let col = eig.vectors.column(k);
        let outer = col * col.transpose();
        root += &outer * s;
        inv_root += outer / s;
    }
    Ok((SymMatrix::new(root)?, SymMatrix::new(inv_root)?))
}

/// Least-squares coefficients for every column of `targets`.
///
/// Uses Householder QR; when the design is numerically rank deficient the
/// normal equations are solved with a ridge jitter of `1e-10 * trace / p`.
pub fn solve_ls(design: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, p) = design.shape();
    if n == 0 || p == 0 || targets.ncols() == 0 {
        return invalid("least squares with empty input");
    }
    if targets.nrows() != n {
        return invalid(format!("design has {n} rows but targets have {}", targets.nrows()));
    }
    if n < p {
        return invalid(format!("least squares needs n >= p (n={n}, p={p})"));
    }
    if design.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
        return invalid("least squares input has non-finite entries");
    }

    let qr = design.clone().qr();
    let r = qr.r();
    let rmax = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let rank_ok = rmax > 0.0 && (0..p).all(|i| r[(i, i)].abs() > 1e-12 * rmax);
    if rank_ok {
        let qt_y = qr.q().transpose() * targets;
        if let Some(sol) = r.solve_upper_triangular(&qt_y) {
            return Ok(sol);
        }
    }

    let mut gram = design.transpose() * design;
    let jitter = (1e-10 * gram.trace() / p as f64).max(f64::MIN_POSITIVE);
    for i in 0..p {
        gram[(i, i)] += jitter;
    }
    let rhs = design.transpose() * targets;
    gram.cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or_else(|| FpqrError::NumericalFailure("singular least-squares system".into()))
}

/// Solves the square system `a x = b` by LU with partial pivoting.
pub fn solve_square(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return invalid("solve_square: shape mismatch");
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| FpqrError::NumericalFailure("singular square system".into()))
}

/// 2-norm condition number from the singular values; infinite when singular.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Unbiased sample variance (divisor `n - 1`); zero for fewer than two values.
pub fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
}

/// Linear-interpolation sample quantile (the "type 7" definition).
pub fn quantile_type7(v: &[f64], p: f64) -> f64 {
    let mut sorted = v.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &b * b.transpose() + DMatrix::identity(n, n) * 0.1
    }

    fn det_cofactor(a: &DMatrix<f64>) -> f64 {
        let n = a.nrows();
        if n == 1 {
            return a[(0, 0)];
        }
        (0..n)
            .map(|j| {
                let minor = a.clone().remove_row(0).remove_column(j);
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * a[(0, j)] * det_cofactor(&minor)
            })
            .sum()
    }

    #[test]
    fn identity_eigen() {
        let e = sym_eigen(&SymMatrix::identity(2)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);
        assert_eq!(e.vectors, DMatrix::identity(2, 2));
    }

    #[test]
    fn diagonal_eigen() {
        let a = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0])).unwrap();
        let e = sym_eigen(&a).unwrap();
        assert_eq!(e.values, vec![9.0, 4.0]);
        assert_eq!(e.vectors.column(0).as_slice(), &[0.0, 1.0]);
        assert_eq!(e.vectors.column(1).as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn eigen_reconstructs_random_spd() {
        let a = random_spd(5, 11);
        let e = sym_eigen(&SymMatrix::new(a.clone()).unwrap()).unwrap();
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(e.values.clone()));
        let rec = &e.vectors * lam * e.vectors.transpose();
        assert!((rec - &a).amax() <= 1e-8);
        let gram = e.vectors.transpose() * &e.vectors;
        assert!((gram - DMatrix::<f64>::identity(5, 5)).amax() <= 1e-10);
        for w in e.values.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn eigen_trace_and_determinant() {
        for (n, seed) in [(2, 1), (3, 2), (4, 3)] {
            let a = random_spd(n, seed);
            let e = sym_eigen(&SymMatrix::new(a.clone()).unwrap()).unwrap();
            let sum: f64 = e.values.iter().sum();
            assert!((sum - a.trace()).abs() <= 1e-8 * a.trace().abs());
            let prod: f64 = e.values.iter().product();
            let det = det_cofactor(&a);
            assert!((prod - det).abs() <= 1e-8 * det.abs().max(1.0));
        }
    }

    #[test]
    fn eigen_sign_convention() {
        let a = random_spd(6, 5);
        let e = sym_eigen(&SymMatrix::new(a).unwrap()).unwrap();
        for k in 0..6 {
            let col: Vec<f64> = e.vectors.column(k).iter().copied().collect();
            let mut best = 0;
            for i in 0..6 {
                if col[i].abs() > col[best].abs() {
                    best = i;
                }
            }
            assert!(col[best] >= 0.0);
        }
    }

    #[test]
    fn rejects_asymmetric() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(SymMatrix::new(a), Err(FpqrError::InvalidInput(_))));
    }

    #[test]
    fn sqrt_of_identity_and_diagonal() {
        let (r, ir) = sym_sqrt_invsqrt(&SymMatrix::identity(3), 1e-10).unwrap();
        assert!((r.matrix() - DMatrix::<f64>::identity(3, 3)).amax() < 1e-15);
        assert!((ir.matrix() - DMatrix::<f64>::identity(3, 3)).amax() < 1e-15);

        let a = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0])).unwrap();
        let (r, ir) = sym_sqrt_invsqrt(&a, 1e-10).unwrap();
        assert!((r.matrix() - DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0])).amax() < 1e-14);
        let expected = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 1.0 / 3.0]);
        assert!((ir.matrix() - expected).amax() < 1e-14);
    }

    #[test]
    fn sqrt_commutes_and_rejects_indefinite() {
        let a = random_spd(4, 9);
        let s = SymMatrix::new(a.clone()).unwrap();
        let (r, ir) = sym_sqrt_invsqrt(&s, 1e-12).unwrap();
        assert!((r.matrix() * &a - &a * r.matrix()).amax() <= 1e-8);
        assert!((ir.matrix() * &a - &a * ir.matrix()).amax() <= 1e-8);
        assert!((r.matrix() * r.matrix() - &a).amax() <= 1e-8);

        let bad = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).unwrap();
        assert!(matches!(sym_sqrt_invsqrt(&bad, 1e-10), Err(FpqrError::NotPsd { .. })));
    }

    #[test]
    fn ls_identity_and_exact() {
        let t = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let sol = solve_ls(&DMatrix::identity(3, 3), &t).unwrap();
        assert!((sol - &t).amax() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DMatrix::from_fn(12, 3, |_, _| rng.random_range(-1.0..1.0));
        let b = DMatrix::from_row_slice(3, 1, &[1.5, -2.0, 0.25]);
        let sol = solve_ls(&x, &(&x * &b)).unwrap();
        assert!((sol - b).amax() <= 1e-10);
    }

    #[test]
    fn ls_ones_gives_means() {
        let y = DMatrix::from_row_slice(4, 2, &[1.0, 10.0, 2.0, 20.0, 3.0, 30.0, 6.0, 60.0]);
        let sol = solve_ls(&DMatrix::from_element(4, 1, 1.0), &y).unwrap();
        assert!((sol[(0, 0)] - 3.0).abs() < 1e-12);
        assert!((sol[(0, 1)] - 30.0).abs() < 1e-12);
    }

    #[test]
    fn ls_rank_deficient_and_empty() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let y = DMatrix::from_row_slice(3, 1, &[2.0, 4.0, 6.0]);
        let sol = solve_ls(&x, &y).unwrap();
        assert!(((&x * sol) - y).amax() < 1e-6);
        assert!(solve_ls(&DMatrix::zeros(0, 0), &DMatrix::zeros(0, 1)).is_err());
    }

    #[test]
    fn sample_statistics() {
        assert!((sample_variance(&[1.0, 2.0, 3.0, 4.0]) - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(quantile_type7(&[3.0, 1.0, 2.0], 0.5), 2.0);
        assert!((quantile_type7(&[1.0, 2.0, 3.0, 4.0], 0.9) - 3.7).abs() < 1e-12);
        assert_eq!(quantile_type7(&[5.0], 0.1), 5.0);
    }

    #[test]
    fn deterministic() {
        let a = SymMatrix::new(random_spd(7, 4)).unwrap();
        let e1 = sym_eigen(&a).unwrap();
        let e2 = sym_eigen(&a).unwrap();
        assert_eq!(e1.values, e2.values);
        assert_eq!(e1.vectors, e2.vectors);
    }
}
