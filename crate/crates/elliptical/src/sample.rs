//! Sampling through the two-stage representation Y = μ + Σ^{1/2} Z ξ^{-1/2}.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::kernel::{build_scale_matrix, cross_covariance, ScaleMatrix};
use crate::posterior;
use crate::train::EPModel;

fn standard_normal_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Draws from the prior at inputs `x`: rows of the result are draws.
///
/// Each draw samples ξ from the mixing distribution, z ~ N(0, I), and
/// returns μ + L z / √ξ with L the Cholesky factor of Σ = K + εI.
pub fn sample_prior(model: &EPModel, x: &DMatrix<f64>, draws: usize, seed: u64) -> Result<DMatrix<f64>> {
    let scale = build_scale_matrix(&model.kernel, x)?;
    let l = scale.chol_lower();
    let n = x.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DMatrix::zeros(draws, n);
    for d in 0..draws {
        let xi = model.mixing.sample_with(1, &mut rng)[0];
        let z = standard_normal_vector(&mut rng, n);
        let row = &l * z / xi.sqrt();
        for j in 0..n {
            out[(d, j)] = model.mean + row[j];
        }
    }
    Ok(out)
}

/// Prior draws split into the latent (noise-free kernel) part and the noise
/// part, sharing one ξ per draw: y = latent + noise row-wise.
///
/// Conditioned on ξ the two parts are independent Gaussians; marginally they
/// are uncorrelated but not independent, since both carry the same 1/√ξ.
pub fn sample_prior_parts(
    model: &EPModel,
    x: &DMatrix<f64>,
    draws: usize,
    seed: u64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let kernel_only = cross_covariance(&model.kernel, x, x);
    let latent_scale = ScaleMatrix::from_spd(kernel_only)?;
    let l = latent_scale.chol_lower();
    let noise_sd = model.kernel.noise().sqrt();
    let n = x.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut latent = DMatrix::zeros(draws, n);
    let mut noise = DMatrix::zeros(draws, n);
    for d in 0..draws {
        let xi = model.mixing.sample_with(1, &mut rng)[0];
        let root_xi = xi.sqrt();
        let z = standard_normal_vector(&mut rng, n);
        let f = &l * z / root_xi;
        for j in 0..n {
            latent[(d, j)] = model.mean + f[j];
            let e: f64 = rng.sample(StandardNormal);
            noise[(d, j)] = noise_sd * e / root_xi;
        }
    }
    Ok((latent, noise))
}

/// Draws from the posterior at `x_test`: ξ̂ from the conditional mixing
/// (rejection over the prior pieces), then a Gaussian draw with scale
/// Σ₂₂|₁ / ξ̂.
pub fn sample_posterior(
    model: &EPModel,
    x_test: &DMatrix<f64>,
    draws: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let post = posterior::predict(model, x_test)?;
    let cond = posterior::conditional_mixing(model)?;
    let chol = ScaleMatrix::from_spd(post.scale.clone())?;
    let l = chol.chol_lower();
    let n = x_test.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DMatrix::zeros(draws, n);
    for d in 0..draws {
        let xi = cond.sample_with(1, &mut rng)[0];
        let z = standard_normal_vector(&mut rng, n);
        let row = &l * z / xi.sqrt();
        for j in 0..n {
            out[(d, j)] = post.mean[j] + row[j];
        }
    }
    Ok(out)
}
