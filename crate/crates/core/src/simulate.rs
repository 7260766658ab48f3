//! Synthetic function-on-function data with known intercept and coefficient
//! surface.
//!
//! Predictor `X(v) = Σ_{k≤10} k⁻² (ζ₁ₖ √2 sin kπv + ζ₂ₖ √2 cos kπv)` on `v = r/50`,
//! response `𝒴(u) = α(u) + ∫ X(v) β(v,u) dv + ε(u)` on `u = j/60`, with
//! `α(u) = 2 exp(-(u-1)²)` and `β(v,u) = 4 cos(2πu) sin(πv)`.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;

use crate::basis::DiscreteCurveSet;
use crate::error::{invalid, FpqrError, Result};

pub const PREDICTOR_POINTS: usize = 50;
pub const RESPONSE_POINTS: usize = 60;
const TERMS: usize = 10;
/// Mean of the outlier error distribution.
const OUTLIER_MEAN: f64 = 8.0;
/// Contamination fractions the generator accepts.
pub const SUPPORTED_GAMMAS: [f64; 2] = [0.05, 0.10];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorDist {
    /// No response error at all.
    None,
    Normal,
    T5,
    /// Squared standard normal (not centred).
    Chisq1,
    /// Standard normal errors, except a fraction `gamma` of curves whose
    /// errors are drawn from `N(8, 1)`.
    Contaminated { gamma: f64 },
}

impl fmt::Display for ErrorDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorDist::None => f.write_str("none"),
            ErrorDist::Normal => f.write_str("normal"),
            ErrorDist::T5 => f.write_str("t5"),
            ErrorDist::Chisq1 => f.write_str("chisq1"),
            ErrorDist::Contaminated { gamma } => write!(f, "contaminated:{gamma}"),
        }
    }
}

impl FromStr for ErrorDist {
    type Err = FpqrError;
    /// Accepts `none`, `normal`, `t5`, `chisq1` and `contaminated:<gamma>`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let dist = match lower.as_str() {
            "none" => ErrorDist::None,
            "normal" => ErrorDist::Normal,
            "t5" => ErrorDist::T5,
            "chisq1" => ErrorDist::Chisq1,
            other => match other.strip_prefix("contaminated:") {
                Some(g) => {
                    let gamma = g
                        .parse::<f64>()
                        .map_err(|_| FpqrError::InvalidInput(format!("bad contamination fraction '{g}'")))?;
                    ErrorDist::Contaminated { gamma }
                }
                None => return invalid(format!("unknown error distribution '{s}'")),
            },
        };
        dist.validate()?;
        Ok(dist)
    }
}

impl ErrorDist {
    pub fn validate(&self) -> Result<()> {
        if let ErrorDist::Contaminated { gamma } = self {
            if !SUPPORTED_GAMMAS.contains(gamma) {
                return invalid(format!("contamination fraction {gamma} not in {SUPPORTED_GAMMAS:?}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgpSpec {
    pub n: usize,
    pub seed: u64,
    pub error_dist: ErrorDist,
    /// Add standard normal noise to the observed predictor curves.
    pub predictor_noise: bool,
    /// Use one error draw per curve for all grid points instead of iid draws.
    pub shared_error: bool,
}

impl DgpSpec {
    pub fn new(n: usize, seed: u64, error_dist: ErrorDist) -> Self {
        Self { n, seed, error_dist, predictor_noise: true, shared_error: false }
    }

    /// Zero response error and zero predictor noise.
    pub fn noiseless(n: usize, seed: u64) -> Self {
        Self { n, seed, error_dist: ErrorDist::None, predictor_noise: false, shared_error: false }
    }
}

#[derive(Debug, Clone)]
pub struct DgpOutput {
    pub y: DiscreteCurveSet,
    pub x_clean: DiscreteCurveSet,
    pub x_noisy: DiscreteCurveSet,
    pub alpha_true: Vec<f64>,
    /// Rows follow the predictor grid, columns the response grid.
    pub beta_true: DMatrix<f64>,
    /// Which curves received outlier errors.
    pub outliers: Vec<bool>,
}

pub fn predictor_grid() -> Vec<f64> {
    (1..=PREDICTOR_POINTS).map(|r| r as f64 / PREDICTOR_POINTS as f64).collect()
}

pub fn response_grid() -> Vec<f64> {
    (1..=RESPONSE_POINTS).map(|j| j as f64 / RESPONSE_POINTS as f64).collect()
}

pub fn alpha_fn(u: f64) -> f64 {
    2.0 * (-(u - 1.0) * (u - 1.0)).exp()
}

pub fn beta_fn(v: f64, u: f64) -> f64 {
    4.0 * (2.0 * PI * u).cos() * (PI * v).sin()
}

/// `∫₀¹ sin(kπv) sin(πv) dv` and `∫₀¹ cos(kπv) sin(πv) dv`.
fn sine_moments(k: usize) -> (f64, f64) {
    if k == 1 {
        (0.5, 0.0)
    } else {
        let kf = k as f64;
        (0.0, (1.0 + (kf * PI).cos()) / (PI * (1.0 - kf * kf)))
    }
}

/// One standard draw from `dist`; contaminated curves are decided in [`generate`].
pub fn sample_error<R: Rng + ?Sized>(dist: ErrorDist, rng: &mut R) -> f64 {
    match dist {
        ErrorDist::None => 0.0,
        ErrorDist::Normal | ErrorDist::Contaminated { .. } => StandardNormal.sample(rng),
        ErrorDist::T5 => {
            let z: f64 = StandardNormal.sample(rng);
            let c: f64 = ChiSquared::new(5.0).expect("valid degrees of freedom").sample(rng);
            z / (c / 5.0).sqrt()
        }
        ErrorDist::Chisq1 => {
            let z: f64 = StandardNormal.sample(rng);
            z * z
        }
    }
}

struct CurveDraw {
    y: Vec<f64>,
    x_clean: Vec<f64>,
    x_noisy: Vec<f64>,
    outlier: bool,
}

fn draw_curve(spec: &DgpSpec, i: usize, v: &[f64], u: &[f64], alpha: &[f64]) -> CurveDraw {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(i as u64);

    let mut z1 = [0.0; TERMS];
    let mut z2 = [0.0; TERMS];
    for k in 0..TERMS {
        z1[k] = StandardNormal.sample(&mut rng);
        z2[k] = StandardNormal.sample(&mut rng);
    }

    let x_clean: Vec<f64> = v
        .iter()
        .map(|&vr| {
            (1..=TERMS)
                .map(|k| {
                    let kf = k as f64;
                    SQRT_2 / (kf * kf) * (z1[k - 1] * (kf * PI * vr).sin() + z2[k - 1] * (kf * PI * vr).cos())
                })
                .sum()
        })
        .collect();

    let projection: f64 = (1..=TERMS)
        .map(|k| {
            let kf = k as f64;
            let (s, c) = sine_moments(k);
            SQRT_2 / (kf * kf) * (z1[k - 1] * s + z2[k - 1] * c)
        })
        .sum();

    let outlier = match spec.error_dist {
        ErrorDist::Contaminated { gamma } => rng.random::<f64>() < gamma,
        _ => false,
    };
    let shift = if outlier { OUTLIER_MEAN } else { 0.0 };
    let shared = sample_error(spec.error_dist, &mut rng);
    let y = u
        .iter()
        .zip(alpha)
        .map(|(&uj, &a)| {
            let eps = if spec.shared_error { shared } else { sample_error(spec.error_dist, &mut rng) };
            let eps = if matches!(spec.error_dist, ErrorDist::None) { 0.0 } else { eps + shift };
            a + 4.0 * (2.0 * PI * uj).cos() * projection + eps
        })
        .collect();

    let x_noisy = if spec.predictor_noise {
        x_clean
            .iter()
            .map(|x| {
                let e: f64 = StandardNormal.sample(&mut rng);
                x + e
            })
            .collect::<Vec<f64>>()
    } else {
        x_clean.clone()
    };
    CurveDraw { y, x_clean, x_noisy, outlier }
}

/// Draws `spec.n` curve pairs. Curve `i` uses its own substream of the seed,
/// so the output does not depend on the number of worker threads.
pub fn generate(spec: &DgpSpec) -> Result<DgpOutput> {
    if spec.n == 0 {
        return invalid("number of curves must be at least 1");
    }
    spec.error_dist.validate()?;
    let v = predictor_grid();
    let u = response_grid();
    let alpha_true: Vec<f64> = u.iter().map(|&x| alpha_fn(x)).collect();
    let beta_true = DMatrix::from_fn(v.len(), u.len(), |r, j| beta_fn(v[r], u[j]));

    let draws: Vec<CurveDraw> = (0..spec.n)
        .into_par_iter()
        .map(|i| draw_curve(spec, i, &v, &u, &alpha_true))
        .collect();

    let rows = |f: &dyn Fn(&CurveDraw) -> &Vec<f64>, len: usize| {
        DMatrix::from_fn(spec.n, len, |i, j| f(&draws[i])[j])
    };
    let y = DiscreteCurveSet::new(u.clone(), rows(&|d| &d.y, u.len()))?;
    let x_clean = DiscreteCurveSet::new(v.clone(), rows(&|d| &d.x_clean, v.len()))?;
    let x_noisy = DiscreteCurveSet::new(v.clone(), rows(&|d| &d.x_noisy, v.len()))?;
    let outliers = draws.iter().map(|d| d.outlier).collect();
    Ok(DgpOutput { y, x_clean, x_noisy, alpha_true, beta_true, outliers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sample_variance;

    #[test]
    fn closed_forms_at_nodes() {
        assert_eq!(beta_fn(0.5, 0.0), 4.0);
        assert_eq!(alpha_fn(1.0), 2.0);
        assert!((alpha_fn(0.0) - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        let out = generate(&DgpSpec::new(3, 1, ErrorDist::Normal)).unwrap();
        let (v, u) = (predictor_grid(), response_grid());
        assert_eq!(v[24], 0.5);
        assert_eq!(u[59], 1.0);
        assert_eq!(out.beta_true[(24, 59)], 4.0);
        assert_eq!(out.alpha_true[59], 2.0);
        for r in 0..50 {
            for j in 0..60 {
                assert_eq!(out.beta_true[(r, j)], beta_fn(v[r], u[j]));
            }
        }
    }

    #[test]
    fn response_integral_matches_quadrature() {
        let out = generate(&DgpSpec::noiseless(4, 7)).unwrap();
        assert_eq!(out.x_clean.values(), out.x_noisy.values());
        // Rebuild each predictor curve on a fine grid from the same draws.
        for i in 0..4 {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            rng.set_stream(i as u64);
            let z: Vec<(f64, f64)> = (0..TERMS)
                .map(|_| (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
                .collect();
            let x = |v: f64| -> f64 {
                z.iter()
                    .enumerate()
                    .map(|(k, (a, b))| {
                        let kf = (k + 1) as f64;
                        SQRT_2 / (kf * kf) * (a * (kf * PI * v).sin() + b * (kf * PI * v).cos())
                    })
                    .sum()
            };
            assert!((x(0.5) - out.x_clean.values()[(i, 24)]).abs() < 1e-12);
            let m = 2000;
            let h = 1.0 / m as f64;
            for (j, &u) in response_grid().iter().enumerate() {
                let f = |v: f64| x(v) * beta_fn(v, u);
                let simpson = (0..=m)
                    .map(|s| {
                        let w = if s == 0 || s == m { 1.0 } else if s % 2 == 1 { 4.0 } else { 2.0 };
                        w * f(s as f64 * h)
                    })
                    .sum::<f64>()
                    * h
                    / 3.0;
                let got = out.y.values()[(i, j)] - alpha_fn(u);
                assert!((got - simpson).abs() < 1e-6, "curve {i} point {j}: {got} vs {simpson}");
            }
        }
    }

    #[test]
    fn seed_determinism_and_sensitivity() {
        let spec = DgpSpec::new(20, 3, ErrorDist::T5);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.y.values(), b.y.values());
        assert_eq!(a.x_noisy.values(), b.x_noisy.values());
        let c = generate(&DgpSpec { seed: 4, ..spec }).unwrap();
        assert_ne!(a.y.values(), c.y.values());
        // A prefix of curves does not depend on n.
        let short = generate(&DgpSpec { n: 5, ..spec }).unwrap();
        assert_eq!(short.y.values().rows(0, 5), a.y.values().rows(0, 5));
    }

    #[test]
    fn error_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000;
        let normal: Vec<f64> = (0..draws).map(|_| sample_error(ErrorDist::Normal, &mut rng)).collect();
        assert!((normal.iter().sum::<f64>() / draws as f64).abs() < 0.02);
        let t5: Vec<f64> = (0..draws).map(|_| sample_error(ErrorDist::T5, &mut rng)).collect();
        assert!((sample_variance(&t5) - 5.0 / 3.0).abs() < 0.1 * 5.0 / 3.0);
        let chi: Vec<f64> = (0..1000).map(|_| sample_error(ErrorDist::Chisq1, &mut rng)).collect();
        assert!(chi.iter().all(|&e| e >= 0.0));
    }

    #[test]
    fn contamination_fraction() {
        for gamma in SUPPORTED_GAMMAS {
            let out = generate(&DgpSpec::new(1000, 5, ErrorDist::Contaminated { gamma })).unwrap();
            let count = out.outliers.iter().filter(|&&o| o).count() as f64;
            let bound = 3.0 * (1000.0 * gamma * (1.0 - gamma)).sqrt();
            assert!((count - 1000.0 * gamma).abs() <= bound, "gamma {gamma}: {count}");
        }
        assert!(generate(&DgpSpec::new(10, 5, ErrorDist::Contaminated { gamma: 0.2 })).is_err());
    }

    #[test]
    fn outlier_curves_are_shifted() {
        let out = generate(&DgpSpec::new(200, 6, ErrorDist::Contaminated { gamma: 0.10 })).unwrap();
        let clean = generate(&DgpSpec { error_dist: ErrorDist::None, ..DgpSpec::new(200, 6, ErrorDist::Normal) })
            .unwrap();
        for i in 0..200 {
            let mean_err = (0..60).map(|j| out.y.values()[(i, j)] - clean.y.values()[(i, j)]).sum::<f64>() / 60.0;
            if out.outliers[i] {
                assert!(mean_err > 6.0);
            } else {
                assert!(mean_err.abs() < 1.0);
            }
        }
    }

    #[test]
    fn parsing() {
        assert_eq!("t5".parse::<ErrorDist>().unwrap(), ErrorDist::T5);
        assert_eq!(
            "contaminated:0.05".parse::<ErrorDist>().unwrap(),
            ErrorDist::Contaminated { gamma: 0.05 }
        );
        assert!("cauchy".parse::<ErrorDist>().is_err());
        assert!(generate(&DgpSpec::new(0, 1, ErrorDist::Normal)).is_err());
        for d in [ErrorDist::None, ErrorDist::Normal, ErrorDist::T5, ErrorDist::Chisq1] {
            assert_eq!(d.to_string().parse::<ErrorDist>().unwrap(), d);
        }
    }
}
