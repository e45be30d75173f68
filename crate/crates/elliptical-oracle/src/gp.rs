//! Reference exact Gaussian-process regressor.
//!
//! Squared exponential kernel with noise on the diagonal, negative log
//! marginal likelihood and posterior via this crate's own LU solves
//! (Rasmussen & Williams 2006, ch. 2 and 5). Serves as the Gaussian-limit
//! oracle for the elliptical stack and as an independently trained baseline.

use crate::linalg::LuDecomposition;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpParams {
    pub log_lengthscale: f64,
    pub log_signal_var: f64,
    pub log_noise: f64,
}

#[derive(Debug, Clone)]
pub struct GpReference {
    pub params: GpParams,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    pub mean: f64,
}

const LN_2PI: f64 = 1.837_877_066_409_345_3;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(ai, bi)| (ai - bi) * (ai - bi)).sum()
}

impl GpReference {
    pub fn new(params: GpParams, x: Vec<Vec<f64>>, y: Vec<f64>, mean: f64) -> Self {
        assert_eq!(x.len(), y.len());
        assert!(!x.is_empty());
        Self { params, x, y, mean }
    }

    pub fn train_len(&self) -> usize {
        self.y.len()
    }

    fn kernel_entry(&self, a: &[f64], b: &[f64]) -> f64 {
        let ls2 = (2.0 * self.params.log_lengthscale).exp();
        let sv = self.params.log_signal_var.exp();
        sv * (-0.5 * sq_dist(a, b) / ls2).exp()
    }

    /// Training covariance K + eps I, row-major.
    fn sigma(&self) -> Vec<f64> {
        let n = self.x.len();
        let eps = self.params.log_noise.exp();
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = self.kernel_entry(&self.x[i], &self.x[j]);
            }
            m[i * n + i] += eps;
        }
        m
    }

    fn cross(&self, xt: &[Vec<f64>]) -> Vec<f64> {
        let n = self.x.len();
        let m = xt.len();
        let mut k = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                k[i * n + j] = self.kernel_entry(&xt[i], &self.x[j]);
            }
        }
        k
    }

    fn centered(&self) -> Vec<f64> {
        self.y.iter().map(|v| v - self.mean).collect()
    }

    pub fn nll(&self) -> f64 {
        let n = self.x.len();
        let lu = LuDecomposition::new(&self.sigma(), n).expect("singular GP covariance");
        let r = self.centered();
        let alpha = lu.solve(&r);
        let quad: f64 = r.iter().zip(&alpha).map(|(ri, ai)| ri * ai).sum();
        0.5 * quad + 0.5 * lu.log_det() + 0.5 * n as f64 * LN_2PI
    }

    /// Analytic gradient of the NLL in (log_lengthscale, log_signal_var, log_noise).
    pub fn nll_grads(&self) -> [f64; 3] {
        let n = self.x.len();
        let sigma = self.sigma();
        let lu = LuDecomposition::new(&sigma, n).expect("singular GP covariance");
        let r = self.centered();
        let alpha = lu.solve(&r);

        // Sigma^{-1} column by column.
        let mut inv = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = lu.solve(&e);
            e[j] = 0.0;
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }

        let ls2 = (2.0 * self.params.log_lengthscale).exp();
        let eps = self.params.log_noise.exp();
        let mut grads = [0.0; 3];
        for i in 0..n {
            for j in 0..n {
                let d2 = sq_dist(&self.x[i], &self.x[j]);
                let k = self.kernel_entry(&self.x[i], &self.x[j]);
                // d Sigma / d theta for the three log parameters
                let dk = [k * d2 / ls2, k, if i == j { eps } else { 0.0 }];
                let w = 0.5 * (inv[i * n + j] - alpha[i] * alpha[j]);
                for (g, dkt) in grads.iter_mut().zip(dk) {
                    *g += w * dkt;
                }
            }
        }
        grads
    }

    /// Fit by Adam on the analytic gradients, starting from `init`.
    pub fn fit(
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        mean: f64,
        init: GpParams,
        learning_rate: f64,
        iters: usize,
    ) -> GpReference {
        let mut gp = GpReference::new(init, x, y, mean);
        let mut theta = [init.log_lengthscale, init.log_signal_var, init.log_noise];
        let mut m = [0.0; 3];
        let mut v = [0.0; 3];
        let (b1, b2, eps) = (0.9, 0.999, 1e-8);
        let mut best = (gp.nll(), theta);
        for t in 1..=iters {
            let g = gp.nll_grads();
            for i in 0..3 {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let mh = m[i] / (1.0 - b1.powi(t as i32));
                let vh = v[i] / (1.0 - b2.powi(t as i32));
                theta[i] -= learning_rate * mh / (vh.sqrt() + eps);
            }
            gp.params = GpParams {
                log_lengthscale: theta[0],
                log_signal_var: theta[1],
                log_noise: theta[2],
            };
            let nll = gp.nll();
            if nll < best.0 {
                best = (nll, theta);
            }
        }
        gp.params = GpParams {
            log_lengthscale: best.1[0],
            log_signal_var: best.1[1],
            log_noise: best.1[2],
        };
        gp
    }

    /// Posterior mean and covariance (with observation noise on the
    /// diagonal) at the test points. Covariance is row-major m x m.
    pub fn predict(&self, xt: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let n = self.x.len();
        let m = xt.len();
        let lu = LuDecomposition::new(&self.sigma(), n).expect("singular GP covariance");
        let alpha = lu.solve(&self.centered());
        let kx = self.cross(xt);

        let mean: Vec<f64> = (0..m)
            .map(|i| self.mean + (0..n).map(|j| kx[i * n + j] * alpha[j]).sum::<f64>())
            .collect();

        // Sigma^{-1} K_x^T, column per test point.
        let mut solved = vec![0.0; m * n];
        for i in 0..m {
            let col = lu.solve(&kx[i * n..(i + 1) * n]);
            solved[i * n..(i + 1) * n].copy_from_slice(&col);
        }
        let eps = self.params.log_noise.exp();
        let mut cov = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                let prior = self.kernel_entry(&xt[i], &xt[j]) + if i == j { eps } else { 0.0 };
                let reduction: f64 =
                    (0..n).map(|l| kx[i * n + l] * solved[j * n + l]).sum();
                cov[i * m + j] = prior - reduction;
            }
        }
        (mean, cov)
    }

    /// Log density of `yt` under the Gaussian posterior at `xt`.
    pub fn predictive_log_density(&self, xt: &[Vec<f64>], yt: &[f64]) -> f64 {
        let m = xt.len();
        assert_eq!(yt.len(), m);
        let (mean, cov) = self.predict(xt);
        let lu = LuDecomposition::new(&cov, m).expect("singular predictive covariance");
        let r: Vec<f64> = yt.iter().zip(&mean).map(|(a, b)| a - b).collect();
        let alpha = lu.solve(&r);
        let quad: f64 = r.iter().zip(&alpha).map(|(ri, ai)| ri * ai).sum();
        -0.5 * quad - 0.5 * lu.log_det() - 0.5 * m as f64 * LN_2PI
    }
}
