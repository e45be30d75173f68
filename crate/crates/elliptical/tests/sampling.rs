//! Monte Carlo verification of the two-stage sampler: covariance identities,
//! exact-density agreement, and the uncorrelated-noise property.

use elliptical::kernel::{build_scale_matrix, KernelParams};
use elliptical::mixing::MixingDistribution;
use elliptical::posterior::predict;
use elliptical::sample::{sample_posterior, sample_prior, sample_prior_parts};
use elliptical::train::EPModel;
use elliptical_oracle::stats;
use nalgebra::{DMatrix, DVector};

fn wide_mixing() -> MixingDistribution {
    MixingDistribution::new(vec![1.0, 0.5, 2.0, 1.0, 0.3], 0.4, 0.01).unwrap()
}

fn model() -> EPModel {
    let x = DMatrix::from_row_slice(4, 1, &[-2.0, -0.5, 0.5, 2.0]);
    let y = DVector::from_row_slice(&[0.4, -0.3, 0.6, -0.8]);
    EPModel::new(
        wide_mixing(),
        KernelParams::isotropic(0.0, 0.0, (0.2f64).ln()),
        x,
        y,
    )
    .unwrap()
}

fn column(m: &DMatrix<f64>, j: usize) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

#[test]
fn prior_covariance_is_mean_inverse_times_sigma() {
    let m = model();
    let x = DMatrix::from_row_slice(3, 1, &[-1.0, 0.0, 1.0]);
    let draws = sample_prior(&m, &x, 100_000, 5).unwrap();
    let sigma = build_scale_matrix(&m.kernel, &x).unwrap().matrix().clone();
    let scale = m.mixing.mean_inverse().unwrap();
    for i in 0..3 {
        // sample mean agrees with the (zero) location
        let se_mean = stats::std_error(&column(&draws, i));
        assert!(
            stats::mean(&column(&draws, i)).abs() < 3.0 * se_mean,
            "mean of column {i} off"
        );
        for j in 0..=i {
            let (cov, se) = stats::cov_with_se(&column(&draws, i), &column(&draws, j));
            let expected = scale * sigma[(i, j)];
            assert!(
                (cov - expected).abs() < 3.0 * se,
                "cov[{i},{j}] = {cov}, expected {expected} (se {se})"
            );
        }
    }
}

#[test]
fn gaussian_limit_prior_covariance_is_sigma_itself() {
    let mut m = model();
    m.mixing = MixingDistribution::gaussian_limit();
    let x = DMatrix::from_row_slice(2, 1, &[0.0, 0.7]);
    let draws = sample_prior(&m, &x, 100_000, 6).unwrap();
    let sigma = build_scale_matrix(&m.kernel, &x).unwrap().matrix().clone();
    for i in 0..2 {
        for j in 0..=i {
            let (cov, se) = stats::cov_with_se(&column(&draws, i), &column(&draws, j));
            assert!(
                (cov - sigma[(i, j)]).abs() < 3.0 * se,
                "cov[{i},{j}] = {cov}, want {}",
                sigma[(i, j)]
            );
        }
    }
}

#[test]
fn posterior_covariance_matches_cov_scale_times_conditional_scale() {
    let m = model();
    let x_test = DMatrix::from_row_slice(2, 1, &[0.0, 1.2]);
    let post = predict(&m, &x_test).unwrap();
    let expected = post.covariance();
    let draws = sample_posterior(&m, &x_test, 100_000, 7).unwrap();
    for i in 0..2 {
        for j in 0..=i {
            let (cov, se) = stats::cov_with_se(&column(&draws, i), &column(&draws, j));
            assert!(
                (cov - expected[(i, j)]).abs() < 3.0 * se,
                "cov[{i},{j}] = {cov}, expected {} (se {se})",
                expected[(i, j)]
            );
        }
        let mean_i = stats::mean(&column(&draws, i));
        let se_i = stats::std_error(&column(&draws, i));
        assert!((mean_i - post.mean[i]).abs() < 3.0 * se_i);
    }
}

#[test]
fn posterior_draws_follow_exact_predictive_density() {
    use elliptical::posterior::predictive_log_density;
    let m = model();
    let x_test = DMatrix::from_row_slice(1, 1, &[0.3]);
    let draws = sample_posterior(&m, &x_test, 4000, 8).unwrap();
    let xs = column(&draws, 0);

    // build the exact CDF on a grid by integrating the predictive density
    let pdf = |y: f64| {
        predictive_log_density(&m, &x_test, &DVector::from_row_slice(&[y])).unwrap().exp()
    };
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min) - 2.0;
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 2.0;
    let grid: Vec<f64> = (0..=800).map(|i| lo + (hi - lo) * i as f64 / 800.0).collect();
    let mut cum = vec![0.0; grid.len()];
    // left tail below the grid
    cum[0] = elliptical_oracle::integrate(&pdf, lo - 300.0, lo, 1e-9, 1e-13).unwrap().value;
    for i in 1..grid.len() {
        cum[i] = cum[i - 1]
            + elliptical_oracle::integrate(&pdf, grid[i - 1], grid[i], 1e-10, 1e-14)
                .unwrap()
                .value;
    }
    let cdf = |y: f64| {
        let idx = ((y - lo) / (hi - lo) * 800.0).clamp(0.0, 800.0);
        let i = idx.floor() as usize;
        if i >= 800 {
            return cum[800];
        }
        let frac = idx - i as f64;
        (cum[i] + frac * (cum[i + 1] - cum[i])).clamp(0.0, 1.0)
    };
    let p = stats::ks_test(&xs, cdf);
    assert!(p > 0.01, "KS p-value {p}");
}

#[test]
fn latent_and_noise_are_uncorrelated_but_dependent() {
    // E[F Z] = 0, yet both share xi: squared magnitudes are correlated.
    let m = model();
    let x = DMatrix::from_row_slice(1, 1, &[0.4]);
    let n_draws = 100_000;
    let (latent, noise) = sample_prior_parts(&m, &x, n_draws, 9).unwrap();
    let f = column(&latent, 0);
    let z = column(&noise, 0);

    // uncorrelated: E[F Z] = 0 within 3 standard errors
    let products: Vec<f64> = f.iter().zip(&z).map(|(a, b)| a * b).collect();
    let mean_fz = stats::mean(&products);
    let se_fz = stats::std_error(&products);
    assert!(mean_fz.abs() < 3.0 * se_fz, "E[FZ] = {mean_fz} (se {se_fz})");

    // dependent: squares are positively correlated through the shared xi
    let f2: Vec<f64> = f.iter().map(|v| v * v).collect();
    let z2: Vec<f64> = z.iter().map(|v| v * v).collect();
    let (cov_sq, se_sq) = stats::cov_with_se(&f2, &z2);
    assert!(
        cov_sq > 3.0 * se_sq,
        "squared-magnitude dependence not detected: cov {cov_sq} (se {se_sq})"
    );

    // same check read through conditional spread: noise variance among the
    // draws with extreme latent values exceeds that of the central half
    let mut order: Vec<usize> = (0..n_draws).collect();
    order.sort_by(|&a, &b| f[a].abs().total_cmp(&f[b].abs()));
    let central: Vec<f64> = order[..n_draws / 2].iter().map(|&i| z[i]).collect();
    let extreme: Vec<f64> = order[n_draws / 2..].iter().map(|&i| z[i]).collect();
    let (v_c, v_e) = (stats::variance(&central), stats::variance(&extreme));
    assert!(
        v_e > 1.2 * v_c,
        "noise variance given extreme latents {v_e} vs central {v_c}"
    );
}
