//! Closed-form prediction.
//!
//! Conditioning an elliptical process on observations y₁ keeps the Gaussian
//! conditional algebra for the location and scale,
//!
//! ```text
//! μ₂|₁ = μ₂ + Σ₂₁ Σ₁₁⁻¹ (y₁ - μ₁),
//! Σ₂₂|₁ = Σ₂₂ - Σ₂₁ Σ₁₁⁻¹ Σ₁₂,
//! ```
//!
//! while the predictive covariance is Σ₂₂|₁ scaled by E[ξ̂⁻¹] under the
//! conditional mixing density p(ξ | y₁) ∝ ξ^{n₁/2} e^{-ξ u₁/2} p(ξ). That
//! scale factor reduces to a ratio of Ψ sums with shapes n₁/2 and n₁/2 + 1,
//! so the data influence predictions only through (u₁, n₁).

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::density::{mahalanobis, phi_sum};
use crate::error::{EllipticalError, Result};
use crate::kernel::{cross_covariance, ScaleMatrix};
use crate::mixing::MixingDistribution;
use crate::train::EPModel;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Posterior of the elliptical process at a set of test inputs.
#[derive(Debug, Clone)]
pub struct Posterior {
    /// μ₂|₁.
    pub mean: DVector<f64>,
    /// Conditional scale matrix Σ₂₂|₁ (not yet the covariance).
    pub scale: DMatrix<f64>,
    /// E[ξ̂⁻¹]: multiplies the scale matrix into the predictive covariance.
    pub cov_scale: f64,
    /// Squared Mahalanobis distance of the training targets.
    pub u1: f64,
    /// Number of training points conditioned on.
    pub n1: usize,
}

impl Posterior {
    /// Predictive covariance cov_scale · Σ₂₂|₁.
    pub fn covariance(&self) -> DMatrix<f64> {
        &self.scale * self.cov_scale
    }

    /// Per-point predictive variance (diagonal of the covariance).
    pub fn variance(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.scale.nrows(),
            self.scale.diagonal().iter().map(|d| d * self.cov_scale),
        )
    }
}

/// Everything prediction needs from the training side, computed once.
pub(crate) struct TrainedState {
    pub scale11: ScaleMatrix,
    pub alpha: DVector<f64>,
    pub u1: f64,
    pub n1: usize,
}

pub(crate) fn trained_state(model: &EPModel) -> Result<TrainedState> {
    let scale11 = model.scale_matrix()?;
    let mu = DVector::from_element(model.train_len(), model.mean);
    let m = mahalanobis(&scale11, &model.train_y, &mu)?;
    Ok(TrainedState { scale11, alpha: m.alpha, u1: m.u, n1: model.train_len() })
}

/// E[ξ̂⁻¹] as the scaled ratio Σ h_k Ψ_k(n₁/2, u₁) / Σ h_k Ψ_k(n₁/2+1, u₁).
pub(crate) fn covariance_scale(mix: &MixingDistribution, n1: usize, u1: f64) -> Result<f64> {
    let u1 = u1.max(1e-300);
    Ok((phi_sum(mix, n1 as f64 / 2.0, u1)? - phi_sum(mix, n1 as f64 / 2.0 + 1.0, u1)?).exp())
}

fn check_test_inputs(model: &EPModel, x_test: &DMatrix<f64>) -> Result<()> {
    if x_test.ncols() != model.input_dim() {
        return Err(EllipticalError::DimensionMismatch(format!(
            "test inputs have {} columns, model was trained on {}",
            x_test.ncols(),
            model.input_dim()
        )));
    }
    if x_test.nrows() == 0 {
        return Err(EllipticalError::DimensionMismatch("no test inputs".into()));
    }
    if x_test.iter().any(|v| !v.is_finite()) {
        return Err(EllipticalError::Domain("non-finite test inputs".into()));
    }
    Ok(())
}

/// Closed-form posterior at `x_test`.
pub fn predict(model: &EPModel, x_test: &DMatrix<f64>) -> Result<Posterior> {
    check_test_inputs(model, x_test)?;
    let state = trained_state(model)?;
    predict_with_state(model, &state, x_test)
}

pub(crate) fn predict_with_state(
    model: &EPModel,
    state: &TrainedState,
    x_test: &DMatrix<f64>,
) -> Result<Posterior> {
    let k21 = cross_covariance(&model.kernel, x_test, &model.train_x);
    let mean = DVector::from_element(x_test.nrows(), model.mean) + &k21 * &state.alpha;

    let solved = state.scale11.solve_matrix(&k21.transpose()); // Σ₁₁⁻¹ Σ₁₂
    let mut sigma22 = cross_covariance(&model.kernel, x_test, x_test);
    let eps = model.kernel.noise();
    for i in 0..x_test.nrows() {
        sigma22[(i, i)] += eps;
    }
    let mut scale = sigma22 - &k21 * solved;
    // enforce exact symmetry lost to rounding
    for i in 0..scale.nrows() {
        for j in 0..i {
            let avg = 0.5 * (scale[(i, j)] + scale[(j, i)]);
            scale[(i, j)] = avg;
            scale[(j, i)] = avg;
        }
    }

    let cov_scale = covariance_scale(&model.mixing, state.n1, state.u1)?;
    Ok(Posterior { mean, scale, cov_scale, u1: state.u1, n1: state.n1 })
}

/// The conditional mixing distribution p(ξ | y₁) = c ξ^{n₁/2} e^{-ξ u₁/2} p(ξ).
#[derive(Debug, Clone)]
pub struct ConditionalMixing {
    prior: MixingDistribution,
    n1: usize,
    u1: f64,
    /// ln c, the log normalization constant.
    ln_norm_const: f64,
}

impl ConditionalMixing {
    pub fn new(prior: MixingDistribution, n1: usize, u1: f64) -> Result<Self> {
        if u1 < 0.0 || !u1.is_finite() {
            return Err(EllipticalError::Domain(format!("u1 must be finite and >= 0, got {u1}")));
        }
        let u = u1.max(1e-300);
        // c⁻¹ = e^{-u₁/2} Σ_k h_k Ψ_k(n₁/2+1, u₁) / (Δ Σ_k h_k)
        let ln_inv_norm =
            phi_sum(&prior, n1 as f64 / 2.0 + 1.0, u)? - 0.5 * u - prior.ln_norm();
        Ok(Self { prior, n1, u1: u, ln_norm_const: -ln_inv_norm })
    }

    pub fn prior(&self) -> &MixingDistribution {
        &self.prior
    }

    pub fn u1(&self) -> f64 {
        self.u1
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    /// ln c (Appendix-style closed form, used by the normalization tests).
    pub fn ln_norm_const(&self) -> f64 {
        self.ln_norm_const
    }

    /// Pointwise density, evaluated in log space.
    pub fn density(&self, xi: f64) -> f64 {
        if xi <= 0.0 {
            return 0.0;
        }
        let p = self.prior.density(xi);
        if p == 0.0 {
            return 0.0;
        }
        (self.ln_norm_const + 0.5 * self.n1 as f64 * xi.ln() - 0.5 * xi * self.u1 + p.ln()).exp()
    }

    /// E[ξ̂⁻¹], the covariance scale factor.
    pub fn mean_inverse(&self) -> Result<f64> {
        covariance_scale(&self.prior, self.n1, self.u1)
    }

    /// E[ξ̂] = Σ h Ψ(n₁/2+2) / Σ h Ψ(n₁/2+1).
    pub fn mean(&self) -> Result<f64> {
        let s = self.n1 as f64 / 2.0;
        Ok((phi_sum(&self.prior, s + 2.0, self.u1)? - phi_sum(&self.prior, s + 1.0, self.u1)?)
            .exp())
    }

    /// Exact draws by rejection: pieces are proposed with probability
    /// proportional to h_k Δ M_k, where M_k is the maximum of the tilt
    /// w(ξ) = ξ^{n₁/2} e^{-ξ u₁/2} over the piece, then a uniform proposal
    /// inside the piece is accepted with probability w(ξ)/M_k. Pieces are
    /// narrow, so acceptance is high.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(n, &mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let half_n1 = 0.5 * self.n1 as f64;
        let ln_w = |xi: f64| half_n1 * xi.ln() - 0.5 * xi * self.u1;
        // per-piece envelope: the tilt is unimodal with mode at n₁/u₁
        let mode = if self.u1 > 0.0 { self.n1 as f64 / self.u1 } else { f64::INFINITY };
        let m = self.prior.num_pieces();
        let mut ln_envelope = Vec::with_capacity(m);
        let mut ln_weights = Vec::with_capacity(m);
        for k in 0..m {
            let (lo, hi) = (self.prior.edge(k), self.prior.edge(k + 1));
            let peak = mode.clamp(lo.max(1e-300), hi);
            let le = ln_w(peak);
            ln_envelope.push(le);
            let h = self.prior.heights()[k];
            ln_weights.push(if h > 0.0 { h.ln() + le } else { f64::NEG_INFINITY });
        }
        let max_w = ln_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = ln_weights.iter().map(|l| (l - max_w).exp()).collect();
        let total: f64 = weights.iter().sum();

        (0..n)
            .map(|_| loop {
                // categorical piece draw
                let mut t = rng.random::<f64>() * total;
                let mut k = m - 1;
                for (i, w) in weights.iter().enumerate() {
                    if t < *w {
                        k = i;
                        break;
                    }
                    t -= w;
                }
                let lo = self.prior.edge(k);
                let xi = lo + rng.random::<f64>() * self.prior.width();
                let accept_ln = ln_w(xi) - ln_envelope[k];
                if rng.random::<f64>().ln() <= accept_ln {
                    return xi;
                }
            })
            .collect()
    }
}

/// Conditional mixing distribution of a fitted model.
pub fn conditional_mixing(model: &EPModel) -> Result<ConditionalMixing> {
    let state = trained_state(model)?;
    ConditionalMixing::new(model.mixing.clone(), state.n1, state.u1)
}

/// Exact log of the conditional density p(y₂ | y₁) at the test points.
///
/// In the rescaled form,
/// ln p = -(n₂/2) ln 2π - ½ ln|Σ₂₂|₁| - (v - u₁)/2
///        + ln Σ h Ψ(n/2+1, v) - ln Σ h Ψ(n₁/2+1, u₁),
/// with v = u₁ + u₂|₁ and n = n₁ + n₂.
pub fn predictive_log_density(
    model: &EPModel,
    x_test: &DMatrix<f64>,
    y_test: &DVector<f64>,
) -> Result<f64> {
    check_test_inputs(model, x_test)?;
    if y_test.len() != x_test.nrows() {
        return Err(EllipticalError::DimensionMismatch(format!(
            "{} test targets for {} test inputs",
            y_test.len(),
            x_test.nrows()
        )));
    }
    let state = trained_state(model)?;
    predictive_log_density_with_state(model, &state, x_test, y_test)
}

pub(crate) fn predictive_log_density_with_state(
    model: &EPModel,
    state: &TrainedState,
    x_test: &DMatrix<f64>,
    y_test: &DVector<f64>,
) -> Result<f64> {
    let post = predict_with_state(model, state, x_test)?;
    let cond_scale = ScaleMatrix::from_spd(post.scale.clone())?;
    let m = mahalanobis(&cond_scale, y_test, &post.mean)?;
    let n1 = state.n1 as f64;
    let n2 = y_test.len() as f64;
    let u1 = state.u1.max(1e-300);
    let v = (u1 + m.u).max(1e-300);

    Ok(-(0.5 * n2) * LN_2PI - 0.5 * cond_scale.log_det() - 0.5 * (v - u1)
        + phi_sum(&model.mixing, 0.5 * (n1 + n2) + 1.0, v)?
        - phi_sum(&model.mixing, 0.5 * n1 + 1.0, u1)?)
}

/// Mean per-point predictive log density over a test set (each point
/// conditioned on the training data only). The training factorization is
/// shared across points.
pub fn mean_predictive_log_density(
    model: &EPModel,
    x_test: &DMatrix<f64>,
    y_test: &DVector<f64>,
) -> Result<f64> {
    check_test_inputs(model, x_test)?;
    if y_test.len() != x_test.nrows() {
        return Err(EllipticalError::DimensionMismatch(format!(
            "{} test targets for {} test inputs",
            y_test.len(),
            x_test.nrows()
        )));
    }
    let state = trained_state(model)?;
    let mut acc = 0.0;
    for i in 0..x_test.nrows() {
        let xi = DMatrix::from_row_slice(1, x_test.ncols(), &x_test.row(i).iter().cloned().collect::<Vec<_>>());
        let yi = DVector::from_row_slice(&[y_test[i]]);
        acc += predictive_log_density_with_state(model, &state, &xi, &yi)?;
    }
    Ok(acc / x_test.nrows() as f64)
}

/// Equal-tailed Monte Carlo predictive interval per test point.
///
/// Draws come from the exact two-stage representation (ξ̂ from the
/// conditional mixing, then a Gaussian draw). `coverage = 0` degenerates to
/// the per-point median of the draws.
pub fn predictive_interval(
    model: &EPModel,
    x_test: &DMatrix<f64>,
    coverage: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    if !(0.0..1.0).contains(&coverage) {
        return Err(EllipticalError::Domain(format!(
            "coverage must be in [0, 1), got {coverage}"
        )));
    }
    if mc_samples < 2 {
        return Err(EllipticalError::Domain("need at least 2 Monte Carlo samples".into()));
    }
    let draws = crate::sample::sample_posterior(model, x_test, mc_samples, seed)?;
    let lo_q = 0.5 * (1.0 - coverage);
    let hi_q = 0.5 * (1.0 + coverage);
    let mut out = Vec::with_capacity(x_test.nrows());
    let mut column = vec![0.0; mc_samples];
    for j in 0..x_test.nrows() {
        for (i, c) in column.iter_mut().enumerate() {
            *c = draws[(i, j)];
        }
        column.sort_by(|a, b| a.total_cmp(b));
        out.push((sorted_quantile(&column, lo_q), sorted_quantile(&column, hi_q)));
    }
    Ok(out)
}

fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}
