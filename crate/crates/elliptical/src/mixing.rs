//! Piecewise-constant mixing distribution over the positive scale variable.
//!
//! The density is a row of `M` equal-width boxes starting at `l0`:
//!
//! ```text
//! p(xi) = (1 / (Δ Σ_k h_k)) Σ_k h_k 1_{(l_{k-1}, l_k)}(xi),   l_k = l0 + k Δ.
//! ```
//!
//! Heights are stored unnormalized (they are the free training parameters);
//! normalization happens on evaluation. Every moment used by the model has a
//! closed form, and sampling is exact inverse-CDF on the piecewise-linear CDF.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{EllipticalError, Result};

/// Half-width of the box used to emulate a point mass at xi = 1. The
/// log-likelihood gap to an exact GP grows like ((n-u)² /4 - n/2) δ²/6, so
/// this must stay small enough to hold well below 1e-4 even for badly
/// mismatched data (u far from n); the cancellation guard in the gamma
/// evaluation keeps the narrow interval accurate.
pub const GAUSSIAN_LIMIT_HALF_WIDTH: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingDistribution {
    heights: Vec<f64>,
    width: f64,
    start: f64,
}

impl MixingDistribution {
    pub fn new(heights: Vec<f64>, width: f64, start: f64) -> Result<Self> {
        if heights.is_empty() {
            return Err(EllipticalError::Domain("need at least one piece".into()));
        }
        if heights.iter().any(|h| !h.is_finite() || *h < 0.0) {
            return Err(EllipticalError::Domain("heights must be finite and >= 0".into()));
        }
        if !heights.iter().any(|h| *h > 0.0) {
            return Err(EllipticalError::Domain("at least one height must be positive".into()));
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(EllipticalError::Domain(format!("width must be positive, got {width}")));
        }
        if !(start.is_finite() && start >= 0.0) {
            return Err(EllipticalError::Domain(format!("start must be >= 0, got {start}")));
        }
        Ok(Self { heights, width, start })
    }

    /// Uniform heights over `pieces` boxes — the training initialization.
    pub fn uniform(pieces: usize, width: f64, start: f64) -> Result<Self> {
        Self::new(vec![1.0; pieces], width, start)
    }

    /// Single narrow box at xi = 1; the model then coincides with a GP.
    pub fn gaussian_limit() -> Self {
        Self::gaussian_limit_with(GAUSSIAN_LIMIT_HALF_WIDTH)
    }

    pub fn gaussian_limit_with(half_width: f64) -> Self {
        Self::new(vec![1.0], 2.0 * half_width, 1.0 - half_width)
            .expect("gaussian limit preset is always valid")
    }

    /// Heights matched to the scaled chi-square mixing density with
    /// parameter eta = 1 at the piece midpoints: the approximated Cauchy
    /// process. `l0` should be tiny but positive so that moments exist.
    pub fn cauchy_approx(pieces: usize, width: f64, l0: f64) -> Result<Self> {
        Self::student_t_approx(1.0, pieces, width, l0)
    }

    /// Midpoint-matched approximation of the scaled chi-square mixing with
    /// parameter `nu`, i.e. the mixing distribution of a Student-t process.
    pub fn student_t_approx(nu: f64, pieces: usize, width: f64, l0: f64) -> Result<Self> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(EllipticalError::Domain(format!("nu must be positive, got {nu}")));
        }
        // xi ~ chi2(nu)/nu has density ∝ xi^{nu/2 - 1} e^{-nu xi / 2};
        // evaluated in log space and shifted so the largest height is 1.
        let ln_h: Vec<f64> = (0..pieces)
            .map(|k| {
                let mid = l0 + (k as f64 + 0.5) * width;
                (0.5 * nu - 1.0) * mid.ln() - 0.5 * nu * mid
            })
            .collect();
        let max = ln_h.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let heights = ln_h.iter().map(|l| (l - max).exp()).collect();
        Self::new(heights, width, l0)
    }

    pub fn num_pieces(&self) -> usize {
        self.heights.len()
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    /// k-th edge, l_k = l0 + k Δ.
    pub fn edge(&self, k: usize) -> f64 {
        self.start + k as f64 * self.width
    }

    /// Upper end of the support, l_M.
    pub fn end(&self) -> f64 {
        self.edge(self.heights.len())
    }

    pub fn height_sum(&self) -> f64 {
        self.heights.iter().sum()
    }

    /// ln(Δ Σ_k h_k), the normalization constant of the density.
    pub fn ln_norm(&self) -> f64 {
        (self.width * self.height_sum()).ln()
    }

    /// Normalized density at `xi`; zero outside the support.
    pub fn density(&self, xi: f64) -> f64 {
        if xi < self.start || xi >= self.end() || xi.is_nan() {
            return 0.0;
        }
        let k = ((xi - self.start) / self.width) as usize;
        let k = k.min(self.heights.len() - 1);
        self.heights[k] / (self.width * self.height_sum())
    }

    /// E[1/xi] = (1/(Δ Σ h)) Σ_k h_k ln(l_k / l_{k-1}).
    ///
    /// Requires l0 > 0: with support touching zero the expectation diverges.
    pub fn mean_inverse(&self) -> Result<f64> {
        if self.start == 0.0 {
            return Err(EllipticalError::Domain(
                "E[1/xi] diverges when the support starts at zero".into(),
            ));
        }
        let sum: f64 = self
            .heights
            .iter()
            .enumerate()
            .map(|(k, h)| h * (self.edge(k + 1) / self.edge(k)).ln())
            .sum();
        Ok(sum / (self.width * self.height_sum()))
    }

    /// E[xi], the first moment (always finite on the bounded support).
    pub fn mean(&self) -> f64 {
        let sum: f64 = self
            .heights
            .iter()
            .enumerate()
            .map(|(k, h)| {
                let (lo, hi) = (self.edge(k), self.edge(k + 1));
                h * 0.5 * (hi * hi - lo * lo)
            })
            .sum();
        sum / (self.width * self.height_sum())
    }

    /// Piecewise-linear CDF.
    pub fn cdf(&self, xi: f64) -> f64 {
        if xi <= self.start {
            return 0.0;
        }
        if xi >= self.end() {
            return 1.0;
        }
        let total = self.height_sum();
        let k = (((xi - self.start) / self.width) as usize).min(self.heights.len() - 1);
        let below: f64 = self.heights[..k].iter().sum();
        let within = self.heights[k] * (xi - self.edge(k)) / self.width;
        (below + within) / total
    }

    /// Exact inverse of the CDF for q in [0, 1].
    pub fn inv_cdf(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(EllipticalError::Domain(format!("quantile level {q} outside [0, 1]")));
        }
        let total = self.height_sum();
        let target = q * total;
        let mut below = 0.0;
        for (k, &h) in self.heights.iter().enumerate() {
            if below + h >= target || k == self.heights.len() - 1 {
                if h == 0.0 {
                    // mass boundary inside a zero piece: jump to its start
                    return Ok(self.edge(k));
                }
                return Ok(self.edge(k) + (target - below) / h * self.width);
            }
            below += h;
        }
        Ok(self.end())
    }

    /// `n` i.i.d. draws by inverse-CDF; deterministic for a given seed.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(n, &mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n)
            .map(|_| {
                let q: f64 = rng.random();
                self.inv_cdf(q).expect("q in [0,1) is always valid")
            })
            .collect()
    }
}
