//! Adaptive Gauss–Kronrod quadrature and fixed-order Gauss–Legendre rules.
//!
//! The adaptive driver bisects the worst interval (largest error estimate)
//! until the summed error estimate meets the requested tolerance. Node and
//! weight tables are the QUADPACK G7/K15 constants.

use std::collections::BinaryHeap;

/// 15-point Kronrod abscissae on [0, 1] (symmetric about the midpoint).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

/// 7-point Gauss weights (for the even-indexed Kronrod abscissae).
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// 15-point Kronrod weights.
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

#[derive(Debug, Clone, PartialEq)]
pub enum QuadError {
    /// The error estimate did not reach the tolerance within the
    /// subdivision budget.
    ToleranceNotReached { value: f64, abs_err: f64 },
    /// The integrand returned NaN.
    BadIntegrand { at: f64 },
    InvalidInterval,
}

impl std::fmt::Display for QuadError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QuadError::ToleranceNotReached { value, abs_err } => {
                write!(f, "tolerance not reached: value {value}, error estimate {abs_err}")
            }
            QuadError::BadIntegrand { at } => write!(f, "integrand returned NaN at {at}"),
            QuadError::InvalidInterval => write!(f, "invalid integration interval"),
        }
    }
}

impl std::error::Error for QuadError {}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    /// Estimated absolute error.
    pub abs_err: f64,
}

/// One G7/K15 evaluation over [a, b]: returns (kronrod, error estimate).
fn qk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64), QuadError> {
    let center = 0.5 * (a + b);
    let half_len = 0.5 * (b - a);

    let eval = |x: f64| -> Result<f64, QuadError> {
        let v = f(x);
        if v.is_nan() {
            Err(QuadError::BadIntegrand { at: x })
        } else {
            Ok(v)
        }
    };

    let f_center = eval(center)?;
    let mut res_gauss = f_center * WG[3];
    let mut res_kronrod = f_center * WGK[7];
    let mut res_abs = res_kronrod.abs();
    let mut fv = [[0.0f64; 2]; 7];

    for j in 0..7 {
        let abscissa = half_len * XGK[j];
        let f1 = eval(center - abscissa)?;
        let f2 = eval(center + abscissa)?;
        fv[j] = [f1, f2];
        res_kronrod += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_gauss += WG[j / 2] * (f1 + f2);
        }
    }

    let mean = res_kronrod * 0.5;
    let mut res_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv[j][0] - mean).abs() + (fv[j][1] - mean).abs());
    }

    let err = ((res_kronrod - res_gauss) * half_len).abs();
    res_kronrod *= half_len;
    res_abs *= half_len.abs();
    res_asc *= half_len.abs();

    // QUADPACK error rescaling.
    let mut abserr = err;
    if res_asc != 0.0 && abserr != 0.0 {
        abserr = res_asc * (200.0 * abserr / res_asc).powf(1.5).min(1.0);
    }
    let tiny = f64::MIN_POSITIVE / (50.0 * f64::EPSILON);
    if res_abs > tiny {
        abserr = abserr.max(50.0 * f64::EPSILON * res_abs);
    }

    Ok((res_kronrod, abserr))
}

#[derive(Debug)]
struct Interval {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

const MAX_INTERVALS: usize = 4096;

/// Adaptive integration of `f` over the finite interval [a, b].
///
/// Stops once the summed error estimate is below
/// `max(abs_tol, rel_tol * |integral|)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<QuadResult, QuadError> {
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(QuadError::InvalidInterval);
    }

    // Start from a modest panelization rather than one panel: a single
    // 15-point pass over a wide interval can miss a narrow feature entirely
    // and report a spuriously tiny error estimate.
    let panels = 31;
    let mut heap = BinaryHeap::new();
    let mut total_value = 0.0;
    let mut total_err = 0.0;
    for i in 0..panels {
        let pa = a + (b - a) * i as f64 / panels as f64;
        let pb = a + (b - a) * (i + 1) as f64 / panels as f64;
        let (value, err) = qk15(f, pa, pb)?;
        total_value += value;
        total_err += err;
        heap.push(Interval { a: pa, b: pb, value, err });
    }

    while total_err > abs_tol.max(rel_tol * total_value.abs()) {
        if heap.len() >= MAX_INTERVALS {
            return Err(QuadError::ToleranceNotReached { value: total_value, abs_err: total_err });
        }
        let worst = heap.pop().expect("heap cannot be empty here");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval at floating-point resolution; cannot subdivide further.
            return Err(QuadError::ToleranceNotReached { value: total_value, abs_err: total_err });
        }
        let (v1, e1) = qk15(f, worst.a, mid)?;
        let (v2, e2) = qk15(f, mid, worst.b)?;
        total_value += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Interval { a: worst.a, b: mid, value: v1, err: e1 });
        heap.push(Interval { a: mid, b: worst.b, value: v2, err: e2 });
    }

    Ok(QuadResult { value: total_value, abs_err: total_err })
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [a, b],
/// by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let xm = 0.5 * (b + a);
    let xl = 0.5 * (b - a);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j as f64 + 1.0) * z * p2 - j as f64 * p3) / (j as f64 + 1.0);
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = xm - xl * z;
        nodes[n - 1 - i] = xm + xl * z;
        weights[i] = 2.0 * xl / ((1.0 - z * z) * pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    (nodes, weights)
}

/// Marginal density of the scale-mixture model by direct quadrature of the
/// mixture integral
///
/// p(y) = |Sigma|^{-1/2} * Integral_0^inf (xi / 2 pi)^{n/2} exp(-u xi / 2) p(xi) dxi,
///
/// with the piecewise-constant mixing density given by `heights`, `width`
/// and `start`. `sigma` is the n x n scale matrix in row-major order; the
/// determinant and the solve for the squared Mahalanobis distance u use this
/// crate's own LU. Integrates each piece separately and sums.
///
/// Returns the density value together with the summed quadrature error
/// estimate.
pub fn density_by_quadrature(
    heights: &[f64],
    width: f64,
    start: f64,
    sigma: &[f64],
    y: &[f64],
    mu: &[f64],
    rel_tol: f64,
) -> Result<QuadResult, QuadError> {
    let n = y.len();
    assert_eq!(sigma.len(), n * n, "sigma must be n x n row-major");
    assert_eq!(mu.len(), n);

    let lu = crate::linalg::LuDecomposition::new(sigma, n).expect("singular scale matrix");
    let resid: Vec<f64> = y.iter().zip(mu).map(|(yi, mi)| yi - mi).collect();
    let alpha = lu.solve(&resid);
    let u: f64 = resid.iter().zip(&alpha).map(|(r, a)| r * a).sum();
    let det = lu.determinant();

    let height_sum: f64 = heights.iter().sum();
    let norm = 1.0 / (width * height_sum);
    let half_n = n as f64 / 2.0;
    let two_pi = 2.0 * std::f64::consts::PI;

    let mut value = 0.0;
    let mut abs_err = 0.0;
    for (k, &h) in heights.iter().enumerate() {
        if h == 0.0 {
            continue;
        }
        let lo = start + k as f64 * width;
        let hi = lo + width;
        let integrand =
            |xi: f64| norm * h * (xi / two_pi).powf(half_n) * (-0.5 * u * xi).exp();
        let piece = integrate(&integrand, lo, hi, rel_tol, 0.0)?;
        value += piece.value;
        abs_err += piece.abs_err;
    }
    Ok(QuadResult { value: value / det.sqrt(), abs_err: abs_err / det.sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomial_exactly() {
        let r = integrate(&|x: f64| x * x * x - 2.0 * x + 1.0, -1.0, 3.0, 1e-12, 0.0).unwrap();
        // antiderivative x^4/4 - x^2 + x
        let exact = (81.0 / 4.0 - 9.0 + 3.0) - (0.25 - 1.0 - 1.0);
        assert!((r.value - exact).abs() < 1e-10);
    }

    #[test]
    fn integrates_narrow_peak() {
        // Gaussian bump much narrower than the interval; forces many subdivisions.
        let f = |x: f64| (-0.5 * (x - 3.0) * (x - 3.0) / 2.5e-3).exp();
        let r = integrate(&f, -40.0, 40.0, 1e-10, 0.0).unwrap();
        let exact = (2.0 * std::f64::consts::PI * 2.5e-3).sqrt();
        assert!((r.value - exact).abs() / exact < 1e-9, "got {} want {}", r.value, exact);
    }

    #[test]
    fn gauss_legendre_integrates_high_degree() {
        let (x, w) = gauss_legendre(16, 0.0, 2.0);
        // degree-21 rule handles x^20 exactly... 16-point handles up to x^31
        let val: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(20)).sum();
        let exact = 2.0f64.powi(21) / 21.0;
        assert!((val - exact).abs() / exact < 1e-13);
    }

    #[test]
    fn nan_integrand_is_reported() {
        let r = integrate(&|x: f64| if x > 0.5 { f64::NAN } else { 1.0 }, 0.0, 1.0, 1e-8, 0.0);
        assert!(matches!(r, Err(QuadError::BadIntegrand { .. })));
    }

    #[test]
    fn density_quadrature_recovers_gaussian_in_delta_limit() {
        // A very narrow piece at xi = 1 must reproduce the standard normal.
        let heights = [1.0];
        let width = 2e-8;
        let start = 1.0 - 1e-8;
        let sigma = [1.0];
        let y = [0.7];
        let mu = [0.0];
        let r = density_by_quadrature(&heights, width, start, &sigma, &y, &mu, 1e-10).unwrap();
        let gauss = (-0.5 * 0.7 * 0.7f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert!((r.value - gauss).abs() / gauss < 1e-7);
    }

    #[test]
    fn density_quadrature_piece_split_invariance() {
        // Splitting one piece into two equal-height halves leaves the integral unchanged.
        let sigma = [2.0, 0.3, 0.3, 1.0];
        let y = [0.5, -1.2];
        let mu = [0.1, 0.0];
        let one = density_by_quadrature(&[2.0], 0.4, 0.3, &sigma, &y, &mu, 1e-11).unwrap();
        let two = density_by_quadrature(&[2.0, 2.0], 0.2, 0.3, &sigma, &y, &mu, 1e-11).unwrap();
        assert!((one.value - two.value).abs() / one.value < 1e-10);
    }
}
