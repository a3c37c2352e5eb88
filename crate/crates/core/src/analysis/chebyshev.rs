use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::AnalysisError;

pub const DEFAULT_EPSILON: f64 = 0.05;
pub const DEFAULT_D_MAX: usize = 256;
pub const DEFAULT_GRID: usize = 4096;

/// Rank-Chebyshev complexity of one feature at one tolerance.
/// Serializes `kappa` as `null` when infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChebyshevComplexity {
    /// `log2 d`, or infinity when no expansion up to `d_max` terms fits.
    pub kappa: f64,
    /// Number of Chebyshev terms, `None` when `d_max` was exceeded.
    pub d: Option<usize>,
}

/// Samples `f(t)` on `n` uniform points of `[0.1, 1.0]`.
pub fn sample_on_grid(n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
    (0..n)
        .map(|i| f(0.1 + 0.9 * i as f64 / (n - 1).max(1) as f64))
        .collect()
}

fn check(phi: &[f64], d_max: usize) -> Result<(), AnalysisError> {
    if d_max == 0 {
        return Err(AnalysisError::Invalid("d_max must be >= 1".into()));
    }
    if phi.len() < 4 * d_max {
        return Err(AnalysisError::GridTooCoarse {
            points: phi.len(),
            d_max,
        });
    }
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(AnalysisError::Invalid("feature has non-finite samples".into()));
    }
    Ok(())
}

/// `T_0 .. T_{d-1}` evaluated on the grid mapped onto `[-1, 1]`.
fn basis(n: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |i, k| {
        let x = 2.0 * i as f64 / (n - 1) as f64 - 1.0;
        (k as f64 * x.clamp(-1.0, 1.0).acos()).cos()
    })
}

/// Max absolute residual of the least-squares fit with `d` terms.
fn fit_error(phi: &[f64], d: usize) -> f64 {
    let n = phi.len();
    let a = basis(n, d);
    let b = DVector::from_column_slice(phi);
    let qr = a.clone().qr();
    let qtb = qr.q().transpose() * &b;
    let coef = qr.r().solve_upper_triangular(&qtb).unwrap_or_else(|| DVector::zeros(d));
    (a * coef - b).amax()
}

fn powers_of_two(d_max: usize) -> impl Iterator<Item = usize> {
    std::iter::successors(Some(1usize), |d| d.checked_mul(2)).take_while(move |&d| d <= d_max)
}

/// Fit error for every `d` in `1, 2, 4, ..., d_max`, computed in parallel.
pub fn chebyshev_sweep(phi: &[f64], d_max: usize) -> Result<Vec<(usize, f64)>, AnalysisError> {
    check(phi, d_max)?;
    let ds: Vec<usize> = powers_of_two(d_max).collect();
    Ok(ds.into_par_iter().map(|d| (d, fit_error(phi, d))).collect())
}

/// Smallest power-of-two `d <= d_max` whose least-squares Chebyshev fit
/// (over the uniform grid `phi` is sampled on) has max residual `<= epsilon`.
pub fn chebyshev_kappa(phi: &[f64], epsilon: f64, d_max: usize) -> Result<ChebyshevComplexity, AnalysisError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(AnalysisError::Invalid(format!("epsilon {epsilon} must be > 0")));
    }
    check(phi, d_max)?;
    for d in powers_of_two(d_max) {
        if fit_error(phi, d) <= epsilon {
            return Ok(ChebyshevComplexity {
                kappa: (d as f64).log2(),
                d: Some(d),
            });
        }
    }
    Ok(ChebyshevComplexity {
        kappa: f64::INFINITY,
        d: None,
    })
}

/// Complexity at `epsilon` read off a precomputed sweep.
pub fn kappa_from_sweep(sweep: &[(usize, f64)], epsilon: f64) -> ChebyshevComplexity {
    match sweep.iter().find(|(_, err)| *err <= epsilon) {
        Some(&(d, _)) => ChebyshevComplexity {
            kappa: (d as f64).log2(),
            d: Some(d),
        },
        None => ChebyshevComplexity {
            kappa: f64::INFINITY,
            d: None,
        },
    }
}
