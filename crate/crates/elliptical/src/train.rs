//! Joint maximum-marginal-likelihood training.
//!
//! Heights (in EP mode), kernel hyperparameters and the noise level are
//! optimized together by Adam on the penalized objective
//!
//! ```text
//! NLL + λ Σ_{i=2}^M (ĥ_i - ĥ_{i-1})²,     ĥ = h / Σ_k h_k,
//! ```
//!
//! with heights parameterized in log space. The penalty acts on normalized
//! heights because the likelihood itself is invariant to a common rescaling
//! of the raw ones. Training restarts from perturbed initializations and
//! keeps the best objective seen; the landscape has local optima, so single
//! runs occasionally stall on clearly sub-optimal solutions.

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::density;
use crate::error::{EllipticalError, Result};
use crate::kernel::{build_scale_matrix, scale_matrix_grads, KernelParams, ScaleMatrix};
use crate::mixing::MixingDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMode {
    /// Free heights: the full elliptical process.
    Ep,
    /// Mixing pinned to the narrow box at xi = 1: exact GP regression.
    Gp,
    /// Mixing pinned to the scaled chi-square (eta = 1) preset: the
    /// approximated Cauchy process.
    Cap,
}

impl FromStr for FitMode {
    type Err = EllipticalError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ep" => Ok(FitMode::Ep),
            "gp" => Ok(FitMode::Gp),
            "cap" => Ok(FitMode::Cap),
            other => Err(EllipticalError::InvalidConfig(format!("unknown mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for FitMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitMode::Ep => write!(f, "ep"),
            FitMode::Gp => write!(f, "gp"),
            FitMode::Cap => write!(f, "cap"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_iters: usize,
    /// Weight λ of the smoothness penalty on normalized heights.
    pub smoothness_lambda: f64,
    /// Total optimization runs; runs after the first start from perturbed
    /// initializations. The best final objective wins.
    pub restarts: usize,
    pub seed: u64,
    /// Relative objective change over a 25-iteration window below which the
    /// run stops.
    pub tol: f64,
    /// Keep heights at their initialization even in EP mode.
    pub freeze_heights: bool,
    /// Per-dimension lengthscales instead of one shared lengthscale.
    pub ard: bool,
    pub mixing_pieces: usize,
    pub mixing_width: f64,
    pub mixing_start: f64,
    /// Start of the support for the Cauchy preset; tiny but positive so the
    /// predictive moments exist.
    pub cauchy_start: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            max_iters: 2000,
            smoothness_lambda: 0.1,
            restarts: 3,
            seed: 0,
            tol: 1e-8,
            freeze_heights: false,
            ard: false,
            mixing_pieces: 10,
            mixing_width: 0.2,
            mixing_start: 0.01,
            cauchy_start: 1e-4,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(EllipticalError::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(EllipticalError::InvalidConfig("max_iters must be at least 1".into()));
        }
        if self.smoothness_lambda < 0.0 {
            return Err(EllipticalError::InvalidConfig("smoothness_lambda must be >= 0".into()));
        }
        Ok(())
    }
}

/// Standard Adam state (β₁ = 0.9, β₂ = 0.999, eps = 1e-8).
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(learning_rate: f64, dim: usize) -> Self {
        Self { learning_rate, m: vec![0.0; dim], v: vec![0.0; dim], t: 0 }
    }

    /// One bias-corrected update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let b1t = 1.0 - Self::BETA1.powi(self.t as i32);
        let b2t = 1.0 - Self::BETA2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grads[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grads[i] * grads[i];
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + Self::EPS);
        }
    }
}

/// Pure-function form of one Adam update: returns the new parameters and
/// state without touching the inputs.
pub fn adam_step(
    params: &[f64],
    grads: &[f64],
    state: &Adam,
) -> (Vec<f64>, Adam) {
    let mut new_params = params.to_vec();
    let mut new_state = state.clone();
    new_state.step(&mut new_params, grads);
    (new_params, new_state)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Best penalized objective reached.
    pub final_objective: f64,
    /// NLL term alone at the returned parameters.
    pub final_nll: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    /// Whether the window criterion fired before max_iters.
    pub converged: bool,
    /// Index of the winning restart.
    pub restart: usize,
}

/// The fitted regressor: mixing distribution, kernel hyperparameters and the
/// training set (standardized) it conditions on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EPModel {
    pub mixing: MixingDistribution,
    pub kernel: KernelParams,
    pub train_x: DMatrix<f64>,
    pub train_y: DVector<f64>,
    /// Constant mean function (0 on standardized targets).
    pub mean: f64,
    pub diagnostics: FitDiagnostics,
}

impl EPModel {
    pub fn new(
        mixing: MixingDistribution,
        kernel: KernelParams,
        train_x: DMatrix<f64>,
        train_y: DVector<f64>,
    ) -> Result<Self> {
        if train_x.nrows() != train_y.len() || train_x.nrows() == 0 {
            return Err(EllipticalError::DimensionMismatch(format!(
                "{} input rows for {} targets",
                train_x.nrows(),
                train_y.len()
            )));
        }
        Ok(Self { mixing, kernel, train_x, train_y, mean: 0.0, diagnostics: Default::default() })
    }

    pub fn train_len(&self) -> usize {
        self.train_y.len()
    }

    pub fn input_dim(&self) -> usize {
        self.train_x.ncols()
    }

    /// Σ₁₁ over the stored training inputs.
    pub fn scale_matrix(&self) -> Result<ScaleMatrix> {
        build_scale_matrix(&self.kernel, &self.train_x)
    }

    /// Training NLL at the stored parameters.
    pub fn nll(&self) -> Result<f64> {
        let scale = self.scale_matrix()?;
        let mu = DVector::from_element(self.train_len(), self.mean);
        density::nll(&self.mixing, &scale, &self.train_y, &mu)
    }
}

/// Maps the flat optimizer vector to (log-heights | kernel parameters).
struct ParamLayout {
    n_heights: usize,
    n_lengthscales: usize,
}

impl ParamLayout {
    fn dim(&self) -> usize {
        self.n_heights + self.n_lengthscales + 2
    }

    fn unpack(&self, flat: &[f64], template: &MixingDistribution) -> (MixingDistribution, KernelParams) {
        let heights: Vec<f64> = if self.n_heights == 0 {
            template.heights().to_vec()
        } else {
            flat[..self.n_heights].iter().map(|lh| lh.exp()).collect()
        };
        let mixing = MixingDistribution::new(heights, template.width(), template.start())
            .expect("heights from exp() are positive");
        let ls = flat[self.n_heights..self.n_heights + self.n_lengthscales].to_vec();
        let kernel = KernelParams {
            log_lengthscales: ls,
            log_signal_var: flat[self.n_heights + self.n_lengthscales],
            log_noise: flat[self.n_heights + self.n_lengthscales + 1],
        };
        (mixing, kernel)
    }
}

/// Smoothness penalty λ Σ (ĥ_i - ĥ_{i-1})² on normalized heights, together
/// with its gradient in the raw heights.
fn smoothness_penalty(heights: &[f64], lambda: f64) -> (f64, Vec<f64>) {
    let m = heights.len();
    let mut grad = vec![0.0; m];
    if lambda == 0.0 || m < 2 {
        return (0.0, grad);
    }
    let total: f64 = heights.iter().sum();
    let normalized: Vec<f64> = heights.iter().map(|h| h / total).collect();
    let mut pen = 0.0;
    for i in 1..m {
        let d = normalized[i] - normalized[i - 1];
        pen += d * d;
    }
    // ∂ĥ_i/∂h_k = (δ_ik - ĥ_i) / Σh
    for k in 0..m {
        let mut acc = 0.0;
        for i in 1..m {
            let d = normalized[i] - normalized[i - 1];
            let di = (if i == k { 1.0 } else { 0.0 }) - normalized[i];
            let dim1 = (if i - 1 == k { 1.0 } else { 0.0 }) - normalized[i - 1];
            acc += 2.0 * d * (di - dim1);
        }
        grad[k] = lambda * acc / total;
    }
    (lambda * pen, grad)
}

struct Objective<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    mu: DVector<f64>,
    template: MixingDistribution,
    layout: ParamLayout,
    lambda: f64,
}

impl Objective<'_> {
    /// Penalized objective and its gradient in the flat parameterization.
    fn eval(&self, flat: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (mixing, kernel) = self.layout.unpack(flat, &self.template);
        let scale = build_scale_matrix(&kernel, self.x)?;
        let kernel_grad_mats = scale_matrix_grads(&kernel, self.x)?;
        let nll = density::nll(&mixing, &scale, self.y, &self.mu)?;
        let grads = density::nll_grads(&mixing, &scale, self.y, &self.mu, &kernel_grad_mats)?;

        let (pen, pen_grad) = smoothness_penalty(mixing.heights(), self.lambda);
        let mut flat_grad = Vec::with_capacity(self.layout.dim());
        if self.layout.n_heights > 0 {
            for (k, h) in mixing.heights().iter().enumerate() {
                // chain rule into log-heights
                flat_grad.push((grads.heights[k] + pen_grad[k]) * h);
            }
        }
        flat_grad.extend_from_slice(&grads.kernel);
        Ok((nll + pen, flat_grad))
    }

    fn nll_only(&self, flat: &[f64]) -> Result<f64> {
        let (mixing, kernel) = self.layout.unpack(flat, &self.template);
        let scale = build_scale_matrix(&kernel, self.x)?;
        density::nll(&mixing, &scale, self.y, &self.mu)
    }
}

/// Median of pairwise Euclidean distances, the lengthscale initialization.
fn median_pairwise_distance(x: &DMatrix<f64>) -> f64 {
    let n = x.nrows();
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let d2: f64 = (0..x.ncols()).map(|c| (x[(i, c)] - x[(j, c)]).powi(2)).sum();
            let d = d2.sqrt();
            if d > 0.0 {
                dists.push(d);
            }
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(|a, b| a.total_cmp(b));
    dists[dists.len() / 2]
}

fn population_variance(y: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    let mean = y.sum() / n;
    y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Fit an elliptical-process model on (standardized) data.
///
/// EP mode trains the heights from a uniform initialization; GP and CaP fix
/// the mixing to their presets and train kernel and noise only.
pub fn fit(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    config: &TrainConfig,
    mode: FitMode,
) -> Result<EPModel> {
    config.validate()?;
    if x.nrows() != y.len() {
        return Err(EllipticalError::DimensionMismatch(format!(
            "{} input rows for {} targets",
            x.nrows(),
            y.len()
        )));
    }
    if x.nrows() < 2 {
        return Err(EllipticalError::Training("need at least 2 training points".into()));
    }

    let template = match mode {
        FitMode::Ep => {
            MixingDistribution::uniform(config.mixing_pieces, config.mixing_width, config.mixing_start)?
        }
        FitMode::Gp => MixingDistribution::gaussian_limit(),
        FitMode::Cap => MixingDistribution::cauchy_approx(
            config.mixing_pieces,
            config.mixing_width,
            config.cauchy_start,
        )?,
    };
    let heights_free = mode == FitMode::Ep && !config.freeze_heights;

    let n_lengthscales = if config.ard { x.ncols() } else { 1 };
    let layout = ParamLayout {
        n_heights: if heights_free { template.num_pieces() } else { 0 },
        n_lengthscales,
    };

    let objective = Objective {
        x,
        y,
        mu: DVector::from_element(y.len(), 0.0),
        template: template.clone(),
        layout,
        lambda: if heights_free { config.smoothness_lambda } else { 0.0 },
    };

    // base initialization
    let ls0 = median_pairwise_distance(x).ln();
    let noise0 = (0.1 * population_variance(y)).max(1e-8).ln();
    let mut base = Vec::with_capacity(objective.layout.dim());
    if heights_free {
        base.extend(template.heights().iter().map(|h| h.ln()));
    }
    base.extend(std::iter::repeat_n(ls0, n_lengthscales));
    base.push(0.0); // log signal variance
    base.push(noise0);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<(f64, Vec<f64>, FitDiagnostics)> = None;

    for restart in 0..config.restarts.max(1) {
        // restart 0 uses the base init; later ones perturb it
        let mut params = base.clone();
        if restart > 0 {
            for p in params.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *p += 0.3 * z;
            }
        }

        // re-jitter on a broken start rather than giving up immediately
        let mut attempts = 0;
        let mut start = objective.eval(&params);
        while !matches!(&start, Ok((obj, _)) if obj.is_finite()) && attempts < 5 {
            attempts += 1;
            for p in params.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *p += 0.3 * z;
            }
            start = objective.eval(&params);
        }
        let (mut obj, mut grads) = match start {
            Ok((obj, grads)) if obj.is_finite() => (obj, grads),
            Ok(_) | Err(_) => {
                return Err(EllipticalError::Training(format!(
                    "objective not finite at initialization after {attempts} re-jitters \
                     (restart {restart})"
                )))
            }
        };

        let mut adam = Adam::new(config.learning_rate, params.len());
        let mut history = vec![obj];
        let mut run_best = (obj, params.clone(), grad_norm(&grads));
        let mut converged = false;
        let mut iterations = 0;

        for iter in 1..=config.max_iters {
            adam.step(&mut params, &grads);
            match objective.eval(&params) {
                Ok((next_obj, next_grads)) if next_obj.is_finite() => {
                    obj = next_obj;
                    grads = next_grads;
                }
                // A step walked into a numerically broken region; keep the
                // best parameters found so far and stop this run.
                Ok(_) | Err(_) => break,
            }
            iterations = iter;
            if obj < run_best.0 {
                run_best = (obj, params.clone(), grad_norm(&grads));
            }
            history.push(obj);
            if iter >= 25 {
                let prev = history[iter - 25];
                if (prev - obj).abs() <= config.tol * obj.abs().max(1.0) {
                    converged = true;
                    break;
                }
            }
        }

        let diag = FitDiagnostics {
            final_objective: run_best.0,
            final_nll: 0.0, // filled for the winner below
            iterations,
            grad_norm: run_best.2,
            converged,
            restart,
        };
        if best.as_ref().is_none_or(|(b, _, _)| run_best.0 < *b) {
            best = Some((run_best.0, run_best.1, diag));
        }
    }

    let (_, winner, mut diag) = best.expect("at least one restart ran");
    diag.final_nll = objective.nll_only(&winner)?;
    let (mixing, kernel) = objective.layout.unpack(&winner, &template);
    let mut model = EPModel::new(mixing, kernel, x.clone(), y.clone())?;
    model.diagnostics = diag;
    Ok(model)
}

fn grad_norm(g: &[f64]) -> f64 {
    g.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Candidate penalty weights for the cross-validation sweep.
pub const LAMBDA_GRID: [f64; 5] = [0.0, 0.01, 0.1, 1.0, 10.0];

/// Pick the smoothness penalty λ by k-fold cross-validation over
/// [`LAMBDA_GRID`], scoring each fold by the held-out joint predictive log
/// density per point. Folds are assigned by a seeded shuffle, so the choice
/// is deterministic for a given (data, config).
pub fn cross_validate_lambda(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    config: &TrainConfig,
    mode: FitMode,
    folds: usize,
) -> Result<f64> {
    let n = y.len();
    if folds < 2 || n < 2 * folds {
        return Err(EllipticalError::InvalidConfig(format!(
            "cross-validation needs at least 2 folds and 2 points per fold (n = {n}, folds = {folds})"
        )));
    }
    let mut index: Vec<usize> = (0..n).collect();
    {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_f01d);
        index.shuffle(&mut rng);
    }

    let mut best: Option<(f64, f64)> = None; // (score, lambda)
    for &lambda in &LAMBDA_GRID {
        let mut score = 0.0;
        let mut ok = true;
        for fold in 0..folds {
            let held: Vec<usize> =
                index.iter().cloned().skip(fold).step_by(folds).collect();
            let kept: Vec<usize> =
                index.iter().cloned().filter(|i| !held.contains(i)).collect();
            let take = |idx: &[usize]| {
                let xs = DMatrix::from_fn(idx.len(), x.ncols(), |i, j| x[(idx[i], j)]);
                let ys = DVector::from_fn(idx.len(), |i, _| y[idx[i]]);
                (xs, ys)
            };
            let (xk, yk) = take(&kept);
            let (xh, yh) = take(&held);
            let mut fold_config = config.clone();
            fold_config.smoothness_lambda = lambda;
            match fit(&xk, &yk, &fold_config, mode).and_then(|model| {
                crate::posterior::predictive_log_density(&model, &xh, &yh)
            }) {
                Ok(pld) => score += pld / held.len() as f64,
                Err(e) => {
                    log::warn!("lambda {lambda} fold {fold} failed: {e}");
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        score /= folds as f64;
        if best.is_none_or(|(b, _)| score > b) {
            best = Some((score, lambda));
        }
    }
    best.map(|(_, lambda)| lambda)
        .ok_or_else(|| EllipticalError::Training("every cross-validation candidate failed".into()))
}

/// Fit the mixing heights to scalar samples of a unit-scale elliptical
/// distribution by minimizing the mean negative log density (the empirical
/// KL divergence up to the entropy constant). Adam on log-heights.
pub fn fit_mixing_to_samples(
    samples: &[f64],
    pieces: usize,
    width: f64,
    start: f64,
    iters: usize,
) -> Result<MixingDistribution> {
    if samples.len() < 100 {
        return Err(EllipticalError::Training(format!(
            "need at least 100 samples to fit the mixing distribution, got {}",
            samples.len()
        )));
    }
    let template = MixingDistribution::uniform(pieces, width, start)?;

    // ln Ψ_k(3/2, l_{k-1}, l_k, y²) depends on the grid only, not on the
    // heights: precompute the samples × pieces table once.
    let ln_psi_table: Vec<Vec<f64>> = samples
        .iter()
        .map(|y| {
            crate::specfn::piece_ln_psis(1.5, (y * y).max(1e-300), start, width, pieces)
        })
        .collect::<Result<_>>()?;

    let n = samples.len() as f64;
    let eval = |log_h: &[f64]| -> (f64, Vec<f64>) {
        let heights: Vec<f64> = log_h.iter().map(|l| l.exp()).collect();
        let height_sum: f64 = heights.iter().sum();
        let ln_norm = (width * height_sum).ln();
        let mut obj = 0.0;
        let mut grad = vec![0.0; pieces];
        for (y, ln_psis) in samples.iter().zip(&ln_psi_table) {
            let u = (y * y).max(1e-300);
            let terms: Vec<f64> =
                log_h.iter().zip(ln_psis).map(|(lh, lp)| lh + lp).collect();
            let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
            let lse = max + sum.ln();
            obj += 0.5 * u + 0.5 * 1.837_877_066_409_345_3 + ln_norm - lse;
            for k in 0..pieces {
                // ∂/∂h_k of (ln Σh - ln Σ hΨ), then chained into log-height
                grad[k] += (1.0 / height_sum - (ln_psis[k] - lse).exp()) * heights[k];
            }
        }
        (obj / n, grad.iter().map(|g| g / n).collect())
    };

    let mut params = vec![0.0; pieces];
    let (mut obj, mut grads) = eval(&params);
    let mut adam = Adam::new(0.05, pieces);
    let mut best = (obj, params.clone());
    let mut history = vec![obj];
    for iter in 1..=iters {
        adam.step(&mut params, &grads);
        let (next_obj, next_grads) = eval(&params);
        if !next_obj.is_finite() {
            break;
        }
        obj = next_obj;
        grads = next_grads;
        if obj < best.0 {
            best = (obj, params.clone());
        }
        history.push(obj);
        if iter >= 25 {
            let prev = history[iter - 25];
            if (prev - obj).abs() <= 1e-10 * obj.abs().max(1.0) {
                break;
            }
        }
    }

    MixingDistribution::new(
        best.1.iter().map(|l| l.exp()).collect(),
        template.width(),
        template.start(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_converges_on_quadratic_bowl() {
        let mut params = vec![5.0, 5.0];
        let mut adam = Adam::new(0.05, 2);
        for _ in 0..2000 {
            let grads: Vec<f64> = params.iter().map(|p| 2.0 * p).collect();
            adam.step(&mut params, &grads);
        }
        let norm: f64 = params.iter().map(|p| p * p).sum::<f64>().sqrt();
        assert!(norm < 1e-3, "‖x‖ = {norm}");
    }

    #[test]
    fn adam_zero_gradient_is_fixed_point() {
        let mut params = vec![1.0, -2.0];
        let mut adam = Adam::new(0.1, 2);
        adam.step(&mut params, &[0.0, 0.0]);
        assert_eq!(params, vec![1.0, -2.0]);
    }

    #[test]
    fn adam_step_pure_function_is_deterministic() {
        let state = Adam::new(0.01, 2);
        let (p1, _) = adam_step(&[1.0, 2.0], &[0.3, -0.4], &state);
        let (p2, _) = adam_step(&[1.0, 2.0], &[0.3, -0.4], &state);
        assert_eq!(p1, p2);
    }

    #[test]
    fn smoothness_penalty_gradient_matches_fd() {
        let heights = [1.0, 2.0, 0.5, 1.5];
        let lambda = 0.7;
        let (_, grad) = smoothness_penalty(&heights, lambda);
        for k in 0..4 {
            let h = 1e-7;
            let mut plus = heights;
            plus[k] += h;
            let mut minus = heights;
            minus[k] -= h;
            let fd =
                (smoothness_penalty(&plus, lambda).0 - smoothness_penalty(&minus, lambda).0)
                    / (2.0 * h);
            assert!((fd - grad[k]).abs() < 1e-6, "k={k}: fd {fd} vs {}", grad[k]);
        }
    }

    #[test]
    fn mode_strings_parse() {
        assert_eq!("ep".parse::<FitMode>().unwrap(), FitMode::Ep);
        assert_eq!("GP".parse::<FitMode>().unwrap(), FitMode::Gp);
        assert_eq!("CaP".parse::<FitMode>().unwrap(), FitMode::Cap);
        assert!("banana".parse::<FitMode>().is_err());
    }

    #[test]
    fn fit_rejects_tiny_datasets() {
        let x = DMatrix::from_row_slice(1, 1, &[0.0]);
        let y = DVector::from_row_slice(&[1.0]);
        assert!(fit(&x, &y, &TrainConfig::default(), FitMode::Gp).is_err());
    }

    #[test]
    fn fit_mixing_rejects_few_samples() {
        let samples = vec![0.5; 50];
        assert!(fit_mixing_to_samples(&samples, 10, 0.2, 0.01, 100).is_err());
    }
}
