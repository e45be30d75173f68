//! Central finite-difference gradients.

/// Central-difference gradient of `f` at `params`.
///
/// The step is relative per coordinate: `h_i = step * max(1, |x_i|)`.
/// Panics if the function returns a non-finite value at a probe point,
/// since a silent NaN would poison whatever comparison this feeds.
pub fn fd_gradient<F: Fn(&[f64]) -> f64>(f: F, params: &[f64], step: f64) -> Vec<f64> {
    let mut grad = vec![0.0; params.len()];
    let mut probe = params.to_vec();
    for i in 0..params.len() {
        let h = step * params[i].abs().max(1.0);
        let orig = probe[i];
        probe[i] = orig + h;
        let fp = f(&probe);
        probe[i] = orig - h;
        let fm = f(&probe);
        probe[i] = orig;
        assert!(
            fp.is_finite() && fm.is_finite(),
            "non-finite function value in fd_gradient at coordinate {i}: f+ = {fp}, f- = {fm}"
        );
        grad[i] = (fp - fm) / (2.0 * h);
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient() {
        let f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let g = fd_gradient(f, &[1.0, -2.0, 0.5], 1e-6);
        for (gi, xi) in g.iter().zip([1.0, -2.0, 0.5]) {
            assert!((gi - 2.0 * xi).abs() < 1e-8);
        }
    }

    #[test]
    fn sine_gradient() {
        let g = fd_gradient(|x| x[0].sin(), &[0.3], 1e-6);
        assert!((g[0] - 0.3f64.cos()).abs() < 1e-8);
    }

    #[test]
    fn step_halving_is_second_order() {
        // error should shrink by ~4x per halving of the step
        let f = |x: &[f64]| x[0].exp();
        let exact = 1.2f64.exp();
        let e1 = (fd_gradient(f, &[1.2], 1e-3)[0] - exact).abs();
        let e2 = (fd_gradient(f, &[1.2], 5e-4)[0] - exact).abs();
        let ratio = e1 / e2;
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
    }
}
