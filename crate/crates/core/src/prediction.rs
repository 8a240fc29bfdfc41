//! Non-linear prediction of the target from a set of selected columns.
//!
//! Two predictors are provided:
//! - leave-one-out nearest-neighbor regression (Euclidean metric), scored by
//!   the mean squared residual (MSR);
//! - Nadaraya–Watson kernel regression with a Gaussian kernel on the
//!   Mahalanobis distance, scored by AIC.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neighbors::{Metric, NeighborIndex};

const RIDGE: f64 = 1e-10;
const MAX_CONDITION: f64 = 1e12;
const MIN_RESIDUAL: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionScore {
    pub msr: f64,
    pub residuals: Vec<f64>,
}

fn check_design(y: &[f64], u: &[&[f64]]) -> Result<()> {
    if u.is_empty() {
        return Err(Error::InvalidParameter("prediction needs at least one column".into()));
    }
    if let Some(bad) = u.iter().find(|c| c.len() != y.len()) {
        return Err(Error::ShapeMismatch {
            expected: format!("{} rows", y.len()),
            actual: format!("{} rows", bad.len()),
        });
    }
    Ok(())
}

/// Average of `y` over the `neighbors` Euclidean-nearest rows of `u`,
/// excluding the row itself and its Theiler window.
pub fn nn_predict(y: &[f64], u: &[&[f64]], neighbors: usize, theiler: usize) -> Result<Vec<f64>> {
    check_design(y, u)?;
    let index = NeighborIndex::new(u, Metric::Euclidean, theiler)?;
    let mut best = Vec::with_capacity(neighbors + 1);
    (0..y.len())
        .map(|i| {
            index.knn_into(i, neighbors, &mut best)?;
            let sum: f64 = best.iter().map(|&(_, v)| y[v as usize]).sum();
            Ok(sum / neighbors as f64)
        })
        .collect()
}

pub fn msr(y: &[f64], u: &[&[f64]], neighbors: usize, theiler: usize) -> Result<PredictionScore> {
    let predictions = nn_predict(y, u, neighbors, theiler)?;
    let residuals: Vec<f64> = y.iter().zip(&predictions).map(|(a, b)| a - b).collect();
    let msr = residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64;
    Ok(PredictionScore { msr, residuals })
}

/// Kernel bandwidth for unit-variance data in `d` dimensions with `n` rows.
pub fn kde_bandwidth(d: usize, n: usize) -> f64 {
    let d = d as f64;
    1.5 * (1.0 / (d + 2.0)).powf(1.0 / (d + 4.0)) * (n as f64).powf(-1.0 / (d + 4.0))
}

/// Kernel regression output: in-sample predictions and the effective number
/// of parameters `p = Σ_i K(u_i, u_i) / Σ_j K(u_i, u_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeFit {
    pub predictions: Vec<f64>,
    pub complexity: f64,
}

/// Rows of `u` mapped through the inverse Cholesky factor of the (ridged)
/// sample covariance, so Euclidean distance becomes Mahalanobis distance.
fn whiten(u: &[&[f64]]) -> Result<Vec<f64>> {
    let n = u[0].len();
    let d = u.len();
    let means: Vec<f64> = u.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let s: f64 = (0..n).map(|i| (u[a][i] - means[a]) * (u[b][i] - means[b])).sum();
            let v = s / (n - 1) as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    for a in 0..d {
        cov[(a, a)] += RIDGE;
    }
    let eig = cov.clone().symmetric_eigenvalues();
    let max = eig.max();
    let min = eig.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularCovariance { condition });
    }
    let chol = cov.cholesky().ok_or(Error::SingularCovariance {
        condition: f64::INFINITY,
    })?;
    let l = chol.l();
    let mut z = vec![0.0; n * d];
    let mut row = DVector::<f64>::zeros(d);
    for i in 0..n {
        for a in 0..d {
            row[a] = u[a][i];
        }
        let solved = l
            .solve_lower_triangular(&row)
            .ok_or(Error::SingularCovariance {
                condition: f64::INFINITY,
            })?;
        z[i * d..(i + 1) * d].copy_from_slice(solved.as_slice());
    }
    Ok(z)
}

pub fn kde_fit(y: &[f64], u: &[&[f64]]) -> Result<KdeFit> {
    check_design(y, u)?;
    let n = y.len();
    if n == 0 {
        return Err(Error::InvalidParameter("no rows".into()));
    }
    if n == 1 {
        return Ok(KdeFit {
            predictions: y.to_vec(),
            complexity: 1.0,
        });
    }
    let d = u.len();
    let z = whiten(u)?;
    let h = kde_bandwidth(d, n);
    let scale = -1.0 / (2.0 * h * h);
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));

    let mut predictions = Vec::with_capacity(n);
    let mut complexity = 0.0;
    for i in 0..n {
        let zi = &z[i * d..(i + 1) * d];
        let mut weight_sum = 0.0;
        let mut weighted_y = 0.0;
        for j in 0..n {
            let zj = &z[j * d..(j + 1) * d];
            let m2: f64 = zi.iter().zip(zj).map(|(a, b)| (a - b) * (a - b)).sum();
            let w = (m2 * scale).exp();
            weight_sum += w;
            weighted_y += w * y[j];
        }
        // Normalizing constants cancel in both ratios; the self weight is 1.
        predictions.push((weighted_y / weight_sum).clamp(lo, hi));
        complexity += 1.0 / weight_sum;
    }
    Ok(KdeFit {
        predictions,
        complexity,
    })
}

pub fn kde_predict(y: &[f64], u: &[&[f64]]) -> Result<Vec<f64>> {
    kde_fit(y, u).map(|f| f.predictions)
}

/// `N·ln(mean squared residual) + 2p` for the kernel regression of `y` on `u`.
pub fn aic_score(y: &[f64], u: &[&[f64]]) -> Result<f64> {
    let fit = kde_fit(y, u)?;
    let n = y.len() as f64;
    let mse = y
        .iter()
        .zip(&fit.predictions)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    if !(mse >= MIN_RESIDUAL) {
        return Err(Error::DegenerateResidual(mse));
    }
    Ok(n * mse.ln() + 2.0 * fit.complexity)
}
