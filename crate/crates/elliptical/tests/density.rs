//! Likelihood verification: consistency-integral quadrature, normalization,
//! closure under marginalization, and the analytic gradient suite.

use elliptical::density::{nll, nll_grads};
use elliptical::kernel::{build_scale_matrix, scale_matrix_grads, KernelParams, ScaleMatrix};
use elliptical::mixing::MixingDistribution;
use elliptical_oracle::{density_by_quadrature, fd_gradient, integrate, GpReference};
use elliptical_oracle::gp::GpParams;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_mixing(rng: &mut ChaCha8Rng) -> MixingDistribution {
    let m = rng.random_range(1..=10);
    let heights: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..3.0)).collect();
    let width = rng.random_range(0.05..0.5);
    let start = rng.random_range(0.005..0.3);
    MixingDistribution::new(heights, width, start).unwrap()
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let mut m = &a * a.transpose();
    for i in 0..n {
        m[(i, i)] += 0.3 + rng.random_range(0.0..0.5);
    }
    m
}

fn flat(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            v.push(m[(i, j)]);
        }
    }
    v
}

#[test]
fn exp_neg_nll_matches_consistency_integral_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..40 {
        let n = rng.random_range(1..=6);
        let mix = random_mixing(&mut rng);
        let sigma = random_spd(&mut rng, n);
        let y = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let mu = DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5));

        let scale = ScaleMatrix::from_spd(sigma.clone()).unwrap();
        let ours = (-nll(&mix, &scale, &y, &mu).unwrap()).exp();
        let oracle = density_by_quadrature(
            mix.heights(),
            mix.width(),
            mix.start(),
            &flat(&sigma),
            y.as_slice(),
            mu.as_slice(),
            1e-12,
        )
        .unwrap();
        let rel = (ours - oracle.value).abs() / oracle.value;
        assert!(rel < 1e-8, "n={n}: density {ours} vs quadrature {} (rel {rel:.2e})", oracle.value);
    }
}

#[test]
fn univariate_density_normalizes() {
    let mix = MixingDistribution::new(vec![1.0, 2.5, 0.3, 1.2], 0.25, 0.02).unwrap();
    let scale = ScaleMatrix::from_spd(DMatrix::from_row_slice(1, 1, &[1.0])).unwrap();
    let mu = DVector::zeros(1);
    let f = |y: f64| (-nll(&mix, &scale, &DVector::from_row_slice(&[y]), &mu).unwrap()).exp();
    // support starts at 0.02: tails die like exp(-0.01 y²)
    let r = integrate(&f, -120.0, 120.0, 1e-10, 0.0).unwrap();
    assert!((r.value - 1.0).abs() < 1e-8, "integral {}", r.value);
}

#[test]
fn two_point_marginal_integrates_to_one_point_density() {
    // Theorem-level closure under marginalization, done numerically.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..12 {
        let mix = random_mixing(&mut rng);
        let sigma2 = random_spd(&mut rng, 2);
        let y1 = rng.random_range(-1.5..1.5);
        let mu = DVector::zeros(2);

        let scale2 = ScaleMatrix::from_spd(sigma2.clone()).unwrap();
        let joint = |y2: f64| {
            let y = DVector::from_row_slice(&[y1, y2]);
            (-nll(&mix, &scale2, &y, &mu).unwrap()).exp()
        };
        // the slowest possible tail decays like exp(-start · y²/(2 σ22))
        let sd = sigma2[(1, 1)].sqrt();
        let reach = 40.0 * sd / mix.start().sqrt().max(0.05);
        let integral = integrate(&joint, -reach, reach, 1e-10, 0.0).unwrap();

        let scale1 = ScaleMatrix::from_spd(DMatrix::from_row_slice(1, 1, &[sigma2[(0, 0)]])).unwrap();
        let marginal = (-nll(
            &mix,
            &scale1,
            &DVector::from_row_slice(&[y1]),
            &DVector::zeros(1),
        )
        .unwrap())
        .exp();
        let rel = (integral.value - marginal).abs() / marginal;
        assert!(
            rel < 1e-6,
            "trial {trial}: integrated {} vs marginal {marginal} (rel {rel:.2e})",
            integral.value
        );
    }
}

#[test]
fn nll_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for trial in 0..25 {
        let n = rng.random_range(2..=20);
        let d = rng.random_range(1..=3);
        let m = rng.random_range(2..=10);
        let heights: Vec<f64> = (0..m).map(|_| rng.random_range(0.2..2.0)).collect();
        let width = rng.random_range(0.1..0.4);
        let start = rng.random_range(0.01..0.2);
        let x = DMatrix::from_fn(n, d, |_, _| rng.random_range(-2.0..2.0));
        let y = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let mu = DVector::zeros(n);
        let kp = KernelParams::isotropic(
            rng.random_range(-0.7..0.7),
            rng.random_range(-0.5..0.5),
            rng.random_range(-3.0..-1.0),
        );

        let mix = MixingDistribution::new(heights.clone(), width, start).unwrap();
        let scale = build_scale_matrix(&kp, &x).unwrap();
        let kgrads = scale_matrix_grads(&kp, &x).unwrap();
        let grads = nll_grads(&mix, &scale, &y, &mu, &kgrads).unwrap();

        // flat parameter vector: [heights..., log_ls, log_sv, log_noise]
        let pack: Vec<f64> = heights
            .iter()
            .cloned()
            .chain([kp.log_lengthscales[0], kp.log_signal_var, kp.log_noise])
            .collect();
        let f = |p: &[f64]| {
            let mix = MixingDistribution::new(p[..m].to_vec(), width, start).unwrap();
            let kp = KernelParams::isotropic(p[m], p[m + 1], p[m + 2]);
            let scale = build_scale_matrix(&kp, &x).unwrap();
            nll(&mix, &scale, &y, &mu).unwrap()
        };
        let fd = fd_gradient(f, &pack, 1e-6);

        let analytic: Vec<f64> =
            grads.heights.iter().cloned().chain(grads.kernel.iter().cloned()).collect();
        for (i, (an, fdv)) in analytic.iter().zip(&fd).enumerate() {
            let denom = an.abs().max(fdv.abs());
            if denom < 1e-8 {
                continue;
            }
            let rel = (an - fdv).abs() / denom;
            assert!(
                rel < 1e-5,
                "trial {trial} n={n} param {i}: analytic {an} vs fd {fdv} (rel {rel:.2e})"
            );
        }
    }
}

#[test]
fn gaussian_limit_gradients_match_reference_gp() {
    // kernel-hyperparameter gradients of the elliptical NLL collapse to the
    // standard GP gradients when the mixing pinches onto xi = 1
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let n = 12;
    let x = DMatrix::from_fn(n, 1, |_, _| rng.random_range(-3.0..3.0));
    let y = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    let mu = DVector::zeros(n);
    let kp = KernelParams::isotropic(0.2, -0.1, -2.0);

    let mix = MixingDistribution::gaussian_limit_with(1e-5);
    let scale = build_scale_matrix(&kp, &x).unwrap();
    let kgrads = scale_matrix_grads(&kp, &x).unwrap();
    let ours = nll_grads(&mix, &scale, &y, &mu, &kgrads).unwrap();

    let gp = GpReference::new(
        GpParams { log_lengthscale: 0.2, log_signal_var: -0.1, log_noise: -2.0 },
        (0..n).map(|i| vec![x[(i, 0)]]).collect(),
        y.as_slice().to_vec(),
        0.0,
    );
    let reference = gp.nll_grads();
    for (a, b) in ours.kernel.iter().zip(&reference) {
        assert!((a - b).abs() < 1e-4 * b.abs().max(1.0), "elliptical {a} vs gp {b}");
    }
}

#[test]
fn nll_descends_along_negative_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..10 {
        let n = 8;
        let x = DMatrix::from_fn(n, 1, |_, _| rng.random_range(-2.0..2.0));
        let y = DVector::from_fn(n, |_, _| rng.random_range(-1.5..1.5));
        let mu = DVector::zeros(n);
        let heights = vec![1.0, 0.7, 1.3, 0.4];
        let kp = KernelParams::isotropic(0.1, 0.0, -2.0);
        let mix = MixingDistribution::new(heights.clone(), 0.3, 0.05).unwrap();
        let scale = build_scale_matrix(&kp, &x).unwrap();
        let kgrads = scale_matrix_grads(&kp, &x).unwrap();
        let g = nll_grads(&mix, &scale, &y, &mu, &kgrads).unwrap();
        let f0 = nll(&mix, &scale, &y, &mu).unwrap();

        let step = 1e-6;
        let new_heights: Vec<f64> =
            heights.iter().zip(&g.heights).map(|(h, gh)| h - step * gh).collect();
        let kp2 = KernelParams::isotropic(
            0.1 - step * g.kernel[0],
            0.0 - step * g.kernel[1],
            -2.0 - step * g.kernel[2],
        );
        let mix2 = MixingDistribution::new(new_heights, 0.3, 0.05).unwrap();
        let scale2 = build_scale_matrix(&kp2, &x).unwrap();
        let f1 = nll(&mix2, &scale2, &y, &mu).unwrap();
        assert!(f1 <= f0, "step along -grad increased NLL: {f0} -> {f1}");
    }
}
