//! Posterior verification: Gaussian-limit agreement with the reference GP,
//! the Bayes identity, conditional-mixing closed forms, and normalization.

use elliptical::kernel::KernelParams;
use elliptical::mixing::MixingDistribution;
use elliptical::posterior::{
    conditional_mixing, predict, predictive_log_density, ConditionalMixing,
};
use elliptical::train::EPModel;
use elliptical_oracle::gp::GpParams;
use elliptical_oracle::{integrate, GpReference};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_model(rng: &mut ChaCha8Rng, mixing: MixingDistribution, n: usize) -> EPModel {
    let x = DMatrix::from_fn(n, 1, |_, _| rng.random_range(-3.0..3.0));
    let y = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    let kernel = KernelParams::isotropic(
        rng.random_range(-0.5..0.5),
        rng.random_range(-0.4..0.4),
        rng.random_range(-3.0..-1.5),
    );
    EPModel::new(mixing, kernel, x, y).unwrap()
}

#[test]
fn gaussian_limit_matches_reference_gp() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for trial in 0..10 {
        let n = rng.random_range(3..=12);
        let model = random_model(&mut rng, MixingDistribution::gaussian_limit(), n);
        let gp = GpReference::new(
            GpParams {
                log_lengthscale: model.kernel.log_lengthscales[0],
                log_signal_var: model.kernel.log_signal_var,
                log_noise: model.kernel.log_noise,
            },
            (0..n).map(|i| vec![model.train_x[(i, 0)]]).collect(),
            model.train_y.as_slice().to_vec(),
            0.0,
        );

        // NLL agreement
        assert!(
            (model.nll().unwrap() - gp.nll()).abs() < 1e-4,
            "trial {trial}: nll {} vs {}",
            model.nll().unwrap(),
            gp.nll()
        );

        // posterior agreement at a handful of test points
        let xts: Vec<f64> = (0..4).map(|_| rng.random_range(-3.5..3.5)).collect();
        let x_test = DMatrix::from_fn(4, 1, |i, _| xts[i]);
        let post = predict(&model, &x_test).unwrap();
        assert!((post.cov_scale - 1.0).abs() < 1e-4, "cov_scale {}", post.cov_scale);
        let (gp_mean, gp_cov) = gp.predict(&xts.iter().map(|v| vec![*v]).collect::<Vec<_>>());
        let cov = post.covariance();
        for i in 0..4 {
            assert!((post.mean[i] - gp_mean[i]).abs() < 1e-4);
            for j in 0..4 {
                assert!((cov[(i, j)] - gp_cov[i * 4 + j]).abs() < 1e-4);
            }
        }

        // predictive log density agreement
        let y_test = DVector::from_fn(4, |i, _| gp_mean[i] + rng.random_range(-1.0..1.0));
        let ours = predictive_log_density(&model, &x_test, &y_test).unwrap();
        let reference = gp.predictive_log_density(
            &xts.iter().map(|v| vec![*v]).collect::<Vec<_>>(),
            y_test.as_slice(),
        );
        assert!((ours - reference).abs() < 1e-4, "pld {ours} vs {reference}");
    }
}

#[test]
fn bayes_identity_joint_over_marginal() {
    // p(y2 | y1) == p(y1, y2) / p(y1), evaluated through independent code paths
    use elliptical::density::nll;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let mix = MixingDistribution::new(vec![1.0, 2.0, 0.6, 1.4], 0.25, 0.03).unwrap();
        let model = random_model(&mut rng, mix.clone(), 5);
        let x_test = DMatrix::from_fn(2, 1, |_, _| rng.random_range(-3.0..3.0));
        let y_test = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));

        let conditional = predictive_log_density(&model, &x_test, &y_test).unwrap();

        // joint over [train, test]
        let n = model.train_len() + 2;
        let mut x_joint = DMatrix::zeros(n, 1);
        let mut y_joint = DVector::zeros(n);
        for i in 0..model.train_len() {
            x_joint[(i, 0)] = model.train_x[(i, 0)];
            y_joint[i] = model.train_y[i];
        }
        for i in 0..2 {
            x_joint[(model.train_len() + i, 0)] = x_test[(i, 0)];
            y_joint[model.train_len() + i] = y_test[i];
        }
        let joint_scale =
            elliptical::kernel::build_scale_matrix(&model.kernel, &x_joint).unwrap();
        let joint = -nll(&mix, &joint_scale, &y_joint, &DVector::zeros(n)).unwrap();
        let marginal = -model.nll().unwrap();

        let rel = ((joint - marginal) - conditional).abs() / conditional.abs().max(1.0);
        assert!(
            rel < 1e-8,
            "Bayes identity: conditional {conditional} vs joint-minus-marginal {}",
            joint - marginal
        );
    }
}

#[test]
fn predictive_density_normalizes_for_single_test_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mix = MixingDistribution::new(vec![1.0, 0.8, 1.5], 0.3, 0.04).unwrap();
    let model = random_model(&mut rng, mix, 6);
    let x_test = DMatrix::from_row_slice(1, 1, &[0.7]);
    let f = |y: f64| {
        predictive_log_density(&model, &x_test, &DVector::from_row_slice(&[y]))
            .unwrap()
            .exp()
    };
    let r = integrate(&f, -80.0, 80.0, 1e-10, 0.0).unwrap();
    assert!((r.value - 1.0).abs() < 1e-8, "integral {}", r.value);
}

#[test]
fn predictive_marginal_of_two_point_matches_one_point() {
    // integrating the 2-point predictive over the second output recovers the
    // 1-point predictive: consistency under marginalization
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mix = MixingDistribution::new(vec![0.7, 1.0, 1.8, 0.5], 0.22, 0.05).unwrap();
    let model = random_model(&mut rng, mix, 5);
    let (xa, xb) = (0.4, -1.1);
    let ya = 0.55;

    let x_pair = DMatrix::from_row_slice(2, 1, &[xa, xb]);
    let f = |yb: f64| {
        predictive_log_density(&model, &x_pair, &DVector::from_row_slice(&[ya, yb]))
            .unwrap()
            .exp()
    };
    let integral = integrate(&f, -100.0, 100.0, 1e-9, 0.0).unwrap();

    let single = predictive_log_density(
        &model,
        &DMatrix::from_row_slice(1, 1, &[xa]),
        &DVector::from_row_slice(&[ya]),
    )
    .unwrap()
    .exp();
    let rel = (integral.value - single).abs() / single;
    assert!(rel < 1e-6, "marginalized {} vs single {single} (rel {rel:.2e})", integral.value);
}

#[test]
fn conditional_mixing_normalizes_and_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let mix = MixingDistribution::new(vec![1.0, 2.0, 0.4, 1.1], 0.3, 0.02).unwrap();
    let model = random_model(&mut rng, mix.clone(), 7);
    let cond = conditional_mixing(&model).unwrap();

    // density integrates to 1
    let r = integrate(&|xi| cond.density(xi), mix.start(), mix.end(), 1e-12, 0.0).unwrap();
    assert!((r.value - 1.0).abs() < 1e-10, "conditional mass {}", r.value);

    // ln c matches the directly integrated normalization of the tilt
    let (n1, u1) = (cond.n1() as f64, cond.u1());
    let tilt =
        |xi: f64| (0.5 * n1 * xi.ln() - 0.5 * xi * u1).exp() * cond.prior().density(xi);
    let z = integrate(&tilt, mix.start(), mix.end(), 1e-13, 0.0).unwrap();
    let rel = (cond.ln_norm_const() - (-z.value.ln())).abs() / cond.ln_norm_const().abs().max(1.0);
    assert!(rel < 1e-8, "ln c {} vs quadrature {}", cond.ln_norm_const(), -z.value.ln());
}

#[test]
fn cov_scale_matches_conditional_mean_inverse_by_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let mix = MixingDistribution::new(vec![0.9, 1.3, 0.7, 0.2, 1.6], 0.25, 0.03).unwrap();
    let model = random_model(&mut rng, mix.clone(), 8);
    let post = predict(&model, &DMatrix::from_row_slice(1, 1, &[0.2])).unwrap();
    let cond = conditional_mixing(&model).unwrap();

    let f = |xi: f64| cond.density(xi) / xi;
    let expectation = integrate(&f, mix.start(), mix.end(), 1e-12, 0.0).unwrap();
    let rel = (post.cov_scale - expectation.value).abs() / expectation.value;
    assert!(rel < 1e-3, "cov_scale {} vs E[1/xi | y1] {}", post.cov_scale, expectation.value);
    // the closed form is in fact much tighter than the acceptance threshold
    assert!(rel < 1e-9, "rel {rel:.2e}");
}

#[test]
fn conditional_tilt_shifts_mass_upward_for_small_u1() {
    // when u1 < n1 / E_prior[xi] the tilt is increasing at the prior mean,
    // and the conditional mean of xi should not fall below the prior mean
    let mix = MixingDistribution::new(vec![1.0; 10], 0.2, 0.01).unwrap();
    let prior_mean = mix.mean();
    for (n1, u1_scale) in [(6, 0.5), (12, 0.7), (30, 0.9)] {
        let u1 = u1_scale * n1 as f64 / prior_mean;
        let cond = ConditionalMixing::new(mix.clone(), n1, u1).unwrap();
        let cond_mean = cond.mean().unwrap();
        assert!(
            cond_mean >= prior_mean - 1e-12,
            "n1={n1}: conditional mean {cond_mean} fell below prior mean {prior_mean}"
        );
        // and the covariance scale drops below the prior E[1/xi]
        let prior_mean_inv = mix.mean_inverse().unwrap();
        let cond_mean_inv = cond.mean_inverse().unwrap();
        assert!(
            cond_mean_inv <= prior_mean_inv + 1e-12,
            "n1={n1}: E[1/xi|y] {cond_mean_inv} above prior {prior_mean_inv}"
        );
    }
}

#[test]
fn conditional_sampler_matches_density_histogram() {
    let mix = MixingDistribution::new(vec![1.0, 2.0, 0.5, 1.5, 0.8], 0.3, 0.05).unwrap();
    let cond = ConditionalMixing::new(mix.clone(), 8, 10.0).unwrap();
    let draws = cond.sample(200_000, 31);
    // compare bin frequencies against the integrated density
    let bins = 20;
    let (lo, hi) = (mix.start(), mix.end());
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for d in &draws {
        let b = (((d - lo) / w) as usize).min(bins - 1);
        counts[b] += 1;
    }
    for b in 0..bins {
        let expected = integrate(&|xi| cond.density(xi), lo + b as f64 * w, lo + (b + 1) as f64 * w, 1e-10, 1e-12)
            .unwrap()
            .value;
        let got = counts[b] as f64 / draws.len() as f64;
        let se = (expected * (1.0 - expected) / draws.len() as f64).sqrt();
        assert!(
            (got - expected).abs() < 5.0 * se + 1e-4,
            "bin {b}: frequency {got} vs probability {expected}"
        );
    }
}
