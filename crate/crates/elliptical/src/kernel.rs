//! Squared exponential kernel with diagonal noise: Σ = K + ε I.
//!
//! Hyperparameters live in log space so plain gradient steps keep them
//! positive. The lengthscale is shared across input dimensions by default;
//! passing one log-lengthscale per dimension switches on ARD.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{EllipticalError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// One entry for an isotropic kernel, or d entries for ARD.
    pub log_lengthscales: Vec<f64>,
    pub log_signal_var: f64,
    pub log_noise: f64,
}

impl KernelParams {
    pub fn isotropic(log_lengthscale: f64, log_signal_var: f64, log_noise: f64) -> Self {
        Self { log_lengthscales: vec![log_lengthscale], log_signal_var, log_noise }
    }

    pub fn ard(log_lengthscales: Vec<f64>, log_signal_var: f64, log_noise: f64) -> Self {
        Self { log_lengthscales, log_signal_var, log_noise }
    }

    pub fn noise(&self) -> f64 {
        self.log_noise.exp()
    }

    pub fn signal_var(&self) -> f64 {
        self.log_signal_var.exp()
    }

    /// Number of trainable hyperparameters (lengthscales + signal + noise).
    pub fn num_params(&self) -> usize {
        self.log_lengthscales.len() + 2
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let nl = self.log_lengthscales.len();
        if nl != 1 && nl != dim {
            return Err(EllipticalError::DimensionMismatch(format!(
                "{nl} lengthscales for {dim}-dimensional inputs"
            )));
        }
        let all = self
            .log_lengthscales
            .iter()
            .chain([&self.log_signal_var, &self.log_noise]);
        for v in all {
            if !v.is_finite() {
                return Err(EllipticalError::Domain("kernel parameters must be finite".into()));
            }
        }
        Ok(())
    }

    /// Scaled squared distance Σ_d ((x_d - y_d)/l_d)^2.
    fn scaled_sq_dist(&self, x: &[f64], y: &[f64]) -> f64 {
        if self.log_lengthscales.len() == 1 {
            let inv_l2 = (-2.0 * self.log_lengthscales[0]).exp();
            x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * inv_l2
        } else {
            x.iter()
                .zip(y)
                .zip(&self.log_lengthscales)
                .map(|((a, b), ll)| {
                    let d = (a - b) * (-ll).exp();
                    d * d
                })
                .sum()
        }
    }

    fn covariance(&self, x: &[f64], y: &[f64]) -> f64 {
        self.signal_var() * (-0.5 * self.scaled_sq_dist(x, y)).exp()
    }
}

/// Symmetric positive-definite scale matrix together with its Cholesky
/// factorization and log-determinant.
#[derive(Debug, Clone)]
pub struct ScaleMatrix {
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
    /// Diagonal jitter that had to be added for the factorization (0 if none).
    jitter: f64,
}

impl ScaleMatrix {
    /// Factor an SPD matrix, escalating diagonal jitter from 1e-10 to 1e-4
    /// of the mean diagonal before giving up.
    pub fn from_spd(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return Err(EllipticalError::DimensionMismatch("scale matrix must be square".into()));
        }
        let mean_diag = matrix.diagonal().iter().sum::<f64>() / n as f64;
        if !mean_diag.is_finite() {
            return Err(EllipticalError::Domain("non-finite scale matrix".into()));
        }

        if let Some(chol) = Cholesky::new(matrix.clone()) {
            let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
            return Ok(Self { matrix, chol, log_det, jitter: 0.0 });
        }

        let mut rel = 1e-10;
        while rel <= 1e-4 {
            let jitter = rel * mean_diag;
            let mut jittered = matrix.clone();
            for i in 0..n {
                jittered[(i, i)] += jitter;
            }
            if let Some(chol) = Cholesky::new(jittered.clone()) {
                log::warn!("scale matrix needed jitter {jitter:e} to factor");
                let log_det =
                    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
                return Ok(Self { matrix: jittered, chol, log_det, jitter });
            }
            rel *= 10.0;
        }
        Err(EllipticalError::CholeskyFailed { max_jitter: 1e-4 * mean_diag })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Lower Cholesky factor L with Σ = L Lᵀ.
    pub fn chol_lower(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }

    pub fn solve_matrix(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(rhs)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }
}

/// Assemble Σ = K + ε I over the rows of `x` (points are rows), factored.
pub fn build_scale_matrix(params: &KernelParams, x: &DMatrix<f64>) -> Result<ScaleMatrix> {
    if x.nrows() == 0 {
        return Err(EllipticalError::DimensionMismatch("empty input matrix".into()));
    }
    params.validate(x.ncols())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(EllipticalError::Domain("non-finite inputs".into()));
    }
    let n = x.nrows();
    let eps = params.noise();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let xi: Vec<f64> = x.row(i).iter().cloned().collect();
        for j in 0..=i {
            let xj: Vec<f64> = x.row(j).iter().cloned().collect();
            let k = params.covariance(&xi, &xj);
            m[(i, j)] = k;
            m[(j, i)] = k;
        }
        m[(i, i)] += eps;
    }
    ScaleMatrix::from_spd(m)
}

/// Cross-covariance block between two point sets. No noise: ε enters the
/// diagonal of the joint matrix only.
pub fn cross_covariance(params: &KernelParams, x1: &DMatrix<f64>, x2: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(x1.nrows(), x2.nrows());
    for i in 0..x1.nrows() {
        let xi: Vec<f64> = x1.row(i).iter().cloned().collect();
        for j in 0..x2.nrows() {
            let xj: Vec<f64> = x2.row(j).iter().cloned().collect();
            m[(i, j)] = params.covariance(&xi, &xj);
        }
    }
    m
}

/// ∂Σ/∂θ for each log-hyperparameter, ordered as
/// [log l_1, ..., log l_L, log σ², log ε].
pub fn scale_matrix_grads(params: &KernelParams, x: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>> {
    params.validate(x.ncols())?;
    let n = x.nrows();
    let n_ls = params.log_lengthscales.len();
    let mut grads = vec![DMatrix::zeros(n, n); params.num_params()];

    for i in 0..n {
        let xi: Vec<f64> = x.row(i).iter().cloned().collect();
        for j in 0..=i {
            let xj: Vec<f64> = x.row(j).iter().cloned().collect();
            let k = params.covariance(&xi, &xj);
            if n_ls == 1 {
                // ∂K/∂(log l) = K · r²/l²
                let d2 = params.scaled_sq_dist(&xi, &xj);
                grads[0][(i, j)] = k * d2;
                grads[0][(j, i)] = k * d2;
            } else {
                for (d, ll) in params.log_lengthscales.iter().enumerate() {
                    let rd = (xi[d] - xj[d]) * (-ll).exp();
                    let g = k * rd * rd;
                    grads[d][(i, j)] = g;
                    grads[d][(j, i)] = g;
                }
            }
            // ∂K/∂(log σ²) = K (noise-free part)
            grads[n_ls][(i, j)] = k;
            grads[n_ls][(j, i)] = k;
        }
        // ∂Σ/∂(log ε) = ε I
        grads[n_ls + 1][(i, i)] = params.noise();
    }
    Ok(grads)
}
