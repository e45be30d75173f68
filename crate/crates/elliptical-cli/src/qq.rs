//! QQ-plot data: model quantiles against sample quantiles, before and after
//! fitting the mixing distribution to the samples.

use elliptical::density::univariate_quantile;
use elliptical::mixing::MixingDistribution;
use elliptical::train::fit_mixing_to_samples;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{CliError, CliResult};

/// Known mixing densities for generating 1-D elliptical samples.
#[derive(Debug, Clone, Copy)]
pub enum SampleSource {
    /// Scaled chi-square with scale parameter eta, truncated at `trunc`.
    ScaledChiSquare { eta: f64, trunc: f64 },
    /// Laplace with mode at xi = 1 and the given diversity, truncated at `trunc`.
    TruncatedLaplace { scale: f64, trunc: f64 },
}

impl SampleSource {
    /// Draw `n` samples of y = z / sqrt(xi) with xi from the mixing law.
    pub fn draw(&self, n: usize, seed: u64) -> CliResult<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        match *self {
            SampleSource::ScaledChiSquare { eta, trunc } => {
                let gamma = rand_distr::Gamma::new(eta / 2.0, 2.0 / eta)
                    .map_err(|e| CliError::Usage(format!("bad eta {eta}: {e}")))?;
                while out.len() < n {
                    let xi: f64 = rng.sample(gamma);
                    if xi <= trunc {
                        continue;
                    }
                    let z: f64 = rng.sample(StandardNormal);
                    out.push(z / xi.sqrt());
                }
            }
            SampleSource::TruncatedLaplace { scale, trunc } => {
                if scale <= 0.0 {
                    return Err(CliError::Usage(format!("laplace scale must be positive, got {scale}")));
                }
                while out.len() < n {
                    // inverse-CDF Laplace draw centered at 1
                    let u: f64 = rng.random::<f64>() - 0.5;
                    let xi = 1.0 - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln();
                    if xi <= trunc {
                        continue;
                    }
                    let z: f64 = rng.sample(StandardNormal);
                    out.push(z / xi.sqrt());
                }
            }
        }
        Ok(out)
    }
}

/// One QQ pair per percent level, 1% through 99%.
#[derive(Debug, Clone)]
pub struct QqPair {
    pub level: f64,
    pub sample_quantile: f64,
    pub model_quantile: f64,
}

pub fn qq_pairs(samples: &[f64], mix: &MixingDistribution) -> CliResult<Vec<QqPair>> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    (1..=99)
        .map(|i| {
            let level = i as f64 / 100.0;
            let model_quantile = univariate_quantile(mix, level).map_err(CliError::from)?;
            Ok(QqPair { level, sample_quantile: empirical_quantile(&sorted, level), model_quantile })
        })
        .collect()
}

pub fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

/// Least-squares slope of model quantiles on sample quantiles.
pub fn qq_slope(pairs: &[QqPair]) -> f64 {
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.sample_quantile).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.model_quantile).sum::<f64>() / n;
    let sxy: f64 =
        pairs.iter().map(|p| (p.sample_quantile - mx) * (p.model_quantile - my)).sum();
    let sxx: f64 = pairs.iter().map(|p| (p.sample_quantile - mx).powi(2)).sum();
    sxy / sxx
}

pub fn qq_residual_sum(pairs: &[QqPair]) -> f64 {
    pairs.iter().map(|p| (p.sample_quantile - p.model_quantile).powi(2)).sum()
}

#[derive(Debug)]
pub struct QqOutput {
    pub before: Vec<QqPair>,
    pub after: Vec<QqPair>,
    pub fitted: MixingDistribution,
    pub initial: MixingDistribution,
}

/// Fit the mixing distribution to the samples and produce the QQ pairs for
/// both the uniform initialization and the fitted result.
pub fn run_qq(
    samples: &[f64],
    pieces: usize,
    width: f64,
    start: f64,
    iters: usize,
) -> CliResult<QqOutput> {
    if samples.len() < 100 {
        return Err(CliError::Data(format!(
            "QQ fitting needs at least 100 samples, got {}",
            samples.len()
        )));
    }
    let initial = MixingDistribution::uniform(pieces, width, start).map_err(CliError::from)?;
    let fitted =
        fit_mixing_to_samples(samples, pieces, width, start, iters).map_err(CliError::from)?;
    Ok(QqOutput {
        before: qq_pairs(samples, &initial)?,
        after: qq_pairs(samples, &fitted)?,
        fitted,
        initial,
    })
}

pub fn write_pairs_csv(pairs: &[QqPair], path: &str) -> CliResult<()> {
    let mut writer =
        csv::Writer::from_path(path).map_err(|e| CliError::Internal(format!("{path}: {e}")))?;
    writer
        .write_record(["level", "sample_quantile", "model_quantile"])
        .map_err(|e| CliError::Internal(e.to_string()))?;
    for p in pairs {
        writer
            .write_record([
                format!("{}", p.level),
                format!("{}", p.sample_quantile),
                format!("{}", p.model_quantile),
            ])
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    writer.flush().map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(())
}

/// Histogram of the normalized mixing density: one row per piece.
pub fn write_mixing_csv(mix: &MixingDistribution, path: &str) -> CliResult<()> {
    let mut writer =
        csv::Writer::from_path(path).map_err(|e| CliError::Internal(format!("{path}: {e}")))?;
    writer
        .write_record(["xi_lo", "xi_hi", "density"])
        .map_err(|e| CliError::Internal(e.to_string()))?;
    for k in 0..mix.num_pieces() {
        let lo = mix.edge(k);
        let hi = mix.edge(k + 1);
        let density = mix.density(0.5 * (lo + hi));
        writer
            .write_record([format!("{lo}"), format!("{hi}"), format!("{density}")])
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    writer.flush().map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(())
}
