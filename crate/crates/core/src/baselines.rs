//! Real-valued linear baselines: closed-form ridge (L2) and coordinate
//! descent lasso (L1). Both are intercept-free and use the unscaled
//! objective sum((y - w.phi)^2) + penalty, so lambda grids are comparable
//! with the QUBO path.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::seqdata::EncodedDataset;

const LASSO_TOL: f64 = 1e-8;
const LASSO_MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Penalty {
    L2,
    L1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub lambda: f64,
    pub penalty: Penalty,
}

fn design_matrix(data: &EncodedDataset) -> DMatrix<f64> {
    let n = data.len();
    let d = data.dim();
    DMatrix::from_fn(n, d, |r, c| data.features[r][c] as f64)
}

/// Ridge: w = (Phi^T Phi + lambda I)^-1 Phi^T y via Cholesky.
pub fn ridge_fit(data: &EncodedDataset, lambda: f64) -> Result<LinearModel> {
    if data.is_empty() {
        return Err(Error::EmptyInput("dataset for ridge fit".into()));
    }
    if lambda < 0.0 {
        return Err(Error::Config(format!("lambda {lambda} must be >= 0")));
    }
    let phi = design_matrix(data);
    let y = DVector::from_vec(data.targets.clone());
    let mut gram = phi.transpose() * &phi;
    for i in 0..gram.nrows() {
        gram[(i, i)] += lambda;
    }
    let rhs = phi.transpose() * y;
    let chol = gram
        .cholesky()
        .ok_or(Error::SingularSystem { lambda })?;
    let w = chol.solve(&rhs);
    Ok(LinearModel {
        weights: w.iter().cloned().collect(),
        lambda,
        penalty: Penalty::L2,
    })
}

/// Lasso objective sum((y - Phi w)^2) + lambda ||w||_1.
pub fn lasso_objective(data: &EncodedDataset, lambda: f64, w: &[f64]) -> f64 {
    let mut loss = 0.0;
    for (row, &y) in data.features.iter().zip(&data.targets) {
        let pred: f64 = row.iter().zip(w).map(|(&p, &wi)| p as f64 * wi).sum();
        loss += (y - pred) * (y - pred);
    }
    loss + lambda * w.iter().map(|v| v.abs()).sum::<f64>()
}

fn soft_threshold(a: f64, t: f64) -> f64 {
    if a > t {
        a - t
    } else if a < -t {
        a + t
    } else {
        0.0
    }
}

/// Cyclic coordinate descent with soft-thresholding.
///
/// Converges when the max coordinate change in a sweep drops below 1e-8;
/// a non-convergence error carries the last iterate and KKT residual.
pub fn lasso_fit(data: &EncodedDataset, lambda: f64) -> Result<LinearModel> {
    if data.is_empty() {
        return Err(Error::EmptyInput("dataset for lasso fit".into()));
    }
    if lambda < 0.0 {
        return Err(Error::Config(format!("lambda {lambda} must be >= 0")));
    }
    let n = data.len();
    let d = data.dim();
    // column norms z_j = Phi_j . Phi_j
    let mut col_norm = vec![0.0f64; d];
    for row in &data.features {
        for (j, &p) in row.iter().enumerate() {
            col_norm[j] += (p * p) as f64;
        }
    }
    let mut w = vec![0.0f64; d];
    let mut residual: Vec<f64> = data.targets.clone(); // y - Phi w
    let mut last_delta = f64::INFINITY;
    for _ in 0..LASSO_MAX_SWEEPS {
        let mut max_delta = 0.0f64;
        for j in 0..d {
            if col_norm[j] == 0.0 {
                continue;
            }
            // rho_j = Phi_j . (residual + Phi_j w_j)
            let mut rho = col_norm[j] * w[j];
            for i in 0..n {
                if data.features[i][j] == 1 {
                    rho += residual[i];
                }
            }
            let new_w = soft_threshold(rho, lambda / 2.0) / col_norm[j];
            let delta = new_w - w[j];
            if delta != 0.0 {
                for i in 0..n {
                    if data.features[i][j] == 1 {
                        residual[i] -= delta;
                    }
                }
                w[j] = new_w;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if max_delta < LASSO_TOL {
            return Ok(LinearModel {
                weights: w,
                lambda,
                penalty: Penalty::L1,
            });
        }
        last_delta = max_delta;
    }
    let kkt = lasso_kkt_residual(data, lambda, &w);
    Err(Error::LassoNoConvergence {
        sweeps: LASSO_MAX_SWEEPS,
        delta: last_delta,
        kkt,
        last_iterate: w,
    })
}

/// Max KKT violation: |2 Phi_j^T (y - Phi w)| - lambda for zero weights,
/// |2 Phi_j^T (y - Phi w) - lambda sign(w_j)| for active weights.
pub fn lasso_kkt_residual(data: &EncodedDataset, lambda: f64, w: &[f64]) -> f64 {
    let n = data.len();
    let d = data.dim();
    let mut residual: Vec<f64> = data.targets.clone();
    for (i, row) in data.features.iter().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            if p == 1 {
                residual[i] -= w[j];
            }
        }
    }
    let mut worst = 0.0f64;
    for j in 0..d {
        let mut grad = 0.0;
        for i in 0..n {
            if data.features[i][j] == 1 {
                grad += residual[i];
            }
        }
        grad *= 2.0;
        let violation = if w[j] == 0.0 {
            (grad.abs() - lambda).max(0.0)
        } else {
            (grad - lambda * w[j].signum()).abs()
        };
        worst = worst.max(violation);
    }
    worst
}

/// Ridge stationarity residual ||2 Phi^T (Phi w - y) + 2 lambda w||_inf,
/// relative to max(1, ||Phi^T y||_inf).
pub fn ridge_stationarity_residual(data: &EncodedDataset, lambda: f64, w: &[f64]) -> f64 {
    let phi = design_matrix(data);
    let y = DVector::from_vec(data.targets.clone());
    let wv = DVector::from_vec(w.to_vec());
    let grad = phi.transpose() * (&phi * &wv - &y) * 2.0 + &wv * (2.0 * lambda);
    let scale = (phi.transpose() * y).amax().max(1.0);
    grad.amax() / scale
}
