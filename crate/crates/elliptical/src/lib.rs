//! Elliptical-process regression with a piecewise-constant mixing distribution.
//!
//! An elliptical process generalizes the Gaussian process: every finite
//! marginal is a scale mixture of Gaussians, `y | xi ~ N(mu, Sigma / xi)`,
//! where the mixing variable `xi` follows a density over the positive reals.
//! With a piecewise-constant mixing density the marginal likelihood, the
//! posterior predictive and all hyperparameter gradients stay in closed form,
//! built out of generalized incomplete gamma functions. Concentrating the
//! mixing mass at `xi = 1` recovers exact GP regression; spreading it toward
//! zero produces fat tails and robust fits.
//!
//! Module map:
//!
//! - [`specfn`] — incomplete gamma `Γ(s, a, b)`, its exponentially rescaled
//!   variant `Ψ`, and the analytic derivatives used in training.
//! - [`mixing`] — the piecewise-constant mixing distribution: normalization,
//!   moments, inverse-CDF sampling, and presets (Gaussian limit, scaled
//!   chi-square / Cauchy, Student-t).
//! - [`kernel`] — squared exponential kernel plus diagonal noise, Cholesky
//!   handling, analytic hyperparameter derivatives.
//! - [`density`] — exact negative log-likelihood and its gradients.
//! - [`posterior`] — closed-form prediction, the conditional mixing
//!   distribution, predictive log densities and Monte Carlo intervals.
//! - [`train`] — joint maximum-marginal-likelihood training with Adam,
//!   smoothness penalty, restarts, and the sample-based mixing fitter.
//! - [`sample`] — prior/posterior draws through the two-stage representation
//!   `y = mu + Sigma^{1/2} z / sqrt(xi)`.

pub mod density;
pub mod error;
pub mod kernel;
pub mod mixing;
pub mod posterior;
pub mod sample;
pub mod specfn;
pub mod train;

pub use error::{EllipticalError, Result};
pub use kernel::{KernelParams, ScaleMatrix};
pub use mixing::MixingDistribution;
pub use posterior::Posterior;
pub use train::{EPModel, FitMode, TrainConfig};
