//! Cyclic coordinate-descent solver for n⁻¹‖y − Xθ‖² + λ‖θ‖₁ and its
//! KKT residual.
//!
//! The objective carries 1/n on the quadratic term, so the per-coordinate
//! soft-threshold argument is λ/2, not λ. Getting this off by two silently
//! doubles the effective penalty; the convention is pinned by unit tests.
//!
//! Columns are not assumed standardized: the fused designs fed in by the
//! estimator never are. A column with ‖X_j‖²/n below 1e-12 is pinned at
//! θ_j = 0 for the whole solve.

use alloc::vec;
use alloc::vec::Vec;

use crate::float;
use crate::linalg::{dot, norm1, DenseMatrix};
use crate::Error;

/// Result of a coordinate-descent solve.
#[derive(Debug, Clone)]
pub struct LassoSolution {
    pub coefficients: Vec<f64>,
    /// Full sweeps performed.
    pub iterations: usize,
    /// Max absolute coefficient change in the last sweep.
    pub final_max_update: f64,
    pub objective: f64,
    /// False when the sweep cap was hit before the tolerance; the
    /// coefficients are then the best iterate found.
    pub converged: bool,
}

#[inline]
pub(crate) fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[inline]
pub(crate) fn soft(z: f64, thresh: f64) -> f64 {
    sign(z) * (float::abs(z) - thresh).max(0.0)
}

/// Core cyclic CD on extracted columns, generalized with per-coordinate
/// penalty weights and an optional linear term qᵀθ added to the objective.
/// The plain lasso is weights = None, linear = None.
///
/// Returns (theta, sweeps, final_max_update, converged).
pub(crate) fn cd_run(
    cols: &[Vec<f64>],
    y: &[f64],
    lambda: f64,
    weights: Option<&[f64]>,
    linear: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
    warm_start: Option<&[f64]>,
) -> (Vec<f64>, usize, f64, bool) {
    let k = cols.len();
    let n = y.len() as f64;
    let gram_diag: Vec<f64> = cols.iter().map(|c| dot(c, c) / n).collect();
    let pinned: Vec<bool> = gram_diag.iter().map(|&g| g < 1e-12).collect();

    let mut theta = match warm_start {
        Some(w) => {
            debug_assert_eq!(w.len(), k);
            w.to_vec()
        }
        None => vec![0.0; k],
    };
    for j in 0..k {
        if pinned[j] {
            theta[j] = 0.0;
        }
    }
    let mut resid: Vec<f64> = y.to_vec();
    for j in 0..k {
        if theta[j] != 0.0 {
            let t = theta[j];
            for (r, &c) in resid.iter_mut().zip(&cols[j]) {
                *r -= t * c;
            }
        }
    }

    let objective = |theta: &[f64], resid: &[f64]| -> f64 {
        let mut obj = dot(resid, resid) / n;
        for j in 0..k {
            let w = weights.map_or(1.0, |w| w[j]);
            obj += lambda * w * float::abs(theta[j]);
            if let Some(q) = linear {
                obj += q[j] * theta[j];
            }
        }
        obj
    };

    let mut prev_obj = objective(&theta, &resid);
    let mut max_update = 0.0;
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < max_iter {
        max_update = 0.0;
        for j in 0..k {
            if pinned[j] {
                continue;
            }
            let w = weights.map_or(1.0, |w| w[j]);
            let q = linear.map_or(0.0, |q| q[j]);
            let c = dot(&cols[j], &resid) / n + gram_diag[j] * theta[j] - q / 2.0;
            let new = soft(c, lambda * w / 2.0) / gram_diag[j];
            let delta = new - theta[j];
            if delta != 0.0 {
                for (r, &cv) in resid.iter_mut().zip(&cols[j]) {
                    *r -= delta * cv;
                }
                theta[j] = new;
                let ad = float::abs(delta);
                if ad > max_update {
                    max_update = ad;
                }
            }
        }
        sweeps += 1;
        if cfg!(debug_assertions) {
            let obj = objective(&theta, &resid);
            debug_assert!(
                obj <= prev_obj + 1e-10 * (1.0 + float::abs(prev_obj)),
                "objective rose across a sweep: {prev_obj} -> {obj}"
            );
            prev_obj = obj;
        }
        if max_update <= tol {
            converged = true;
            break;
        }
    }
    (theta, sweeps, max_update, converged)
}

pub(crate) fn extract_columns(x: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..x.cols()).map(|j| x.column(j)).collect()
}

/// Cyclic coordinate descent for n⁻¹‖y − Xθ‖² + λ‖θ‖₁.
///
/// Stops when the largest coefficient change in a sweep is at most `tol`
/// or after `max_iter` sweeps, whichever comes first; the non-convergent
/// case is reported through `converged`, with the best iterate kept.
pub fn lasso_cd(
    x: &DenseMatrix,
    y: &[f64],
    lambda: f64,
    tol: f64,
    max_iter: usize,
    warm_start: Option<&[f64]>,
) -> Result<LassoSolution, Error> {
    if y.len() != x.rows() {
        return Err(Error::DimensionMismatch);
    }
    if let Some(w) = warm_start {
        if w.len() != x.cols() {
            return Err(Error::DimensionMismatch);
        }
    }
    assert!(lambda > 0.0 && lambda.is_finite(), "lambda must be positive");
    let cols = extract_columns(x);
    let (theta, iterations, final_max_update, converged) =
        cd_run(&cols, y, lambda, None, None, tol, max_iter, warm_start);
    let mut resid = y.to_vec();
    for j in 0..cols.len() {
        if theta[j] != 0.0 {
            for (r, &c) in resid.iter_mut().zip(&cols[j]) {
                *r -= theta[j] * c;
            }
        }
    }
    let objective = dot(&resid, &resid) / y.len() as f64 + lambda * norm1(&theta);
    Ok(LassoSolution {
        coefficients: theta,
        iterations,
        final_max_update,
        objective,
        converged,
    })
}

/// Max stationarity violation of θ for the lasso objective:
/// |G_j + λ·sgn(θ_j)| on the support, max(0, |G_j| − λ) off it, where
/// G_j = −(2/n)⟨y − Xθ, X_j⟩.
pub fn lasso_kkt_residual(
    x: &DenseMatrix,
    y: &[f64],
    lambda: f64,
    theta: &[f64],
) -> Result<f64, Error> {
    if y.len() != x.rows() || theta.len() != x.cols() {
        return Err(Error::DimensionMismatch);
    }
    let n = y.len() as f64;
    let mut resid = y.to_vec();
    for j in 0..x.cols() {
        if theta[j] != 0.0 {
            for i in 0..x.rows() {
                resid[i] -= theta[j] * x.get(i, j);
            }
        }
    }
    let mut worst = 0.0f64;
    for j in 0..x.cols() {
        let col = x.column(j);
        let g = -2.0 / n * dot(&resid, &col);
        let v = if theta[j] != 0.0 {
            float::abs(g + lambda * sign(theta[j]))
        } else {
            (float::abs(g) - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    Ok(worst)
}

/// Smallest λ at which the lasso solution is exactly zero:
/// max_j |2⟨X_j, y⟩/n|.
pub fn lambda_max(x: &DenseMatrix, y: &[f64]) -> Result<f64, Error> {
    if y.len() != x.rows() {
        return Err(Error::DimensionMismatch);
    }
    let n = y.len() as f64;
    let mut m = 0.0f64;
    for j in 0..x.cols() {
        let col = x.column(j);
        m = m.max(float::abs(2.0 * dot(&col, y) / n));
    }
    Ok(m)
}
