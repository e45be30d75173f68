//! Datasets: synthetic generators, CSV ingestion, standardization, splits.
//!
//! Datasets store raw values plus the standardization statistics fitted on
//! the training split; models always see the standardized view. Metrics
//! (MSE, log-likelihood) are likewise reported on standardized targets.

use elliptical::kernel::{build_scale_matrix, KernelParams};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub x_mean: Vec<f64>,
    pub x_std: Vec<f64>,
    pub y_mean: f64,
    pub y_std: f64,
    /// Columns whose training-split standard deviation vanished; these are
    /// centered but not scaled.
    pub constant_columns: Vec<usize>,
}

impl Standardization {
    /// Fit on a training split (population standard deviations).
    pub fn fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        let n = x.nrows() as f64;
        let mut x_mean = vec![0.0; x.ncols()];
        let mut x_std = vec![0.0; x.ncols()];
        let mut constant_columns = Vec::new();
        for c in 0..x.ncols() {
            let col = x.column(c);
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            x_mean[c] = mean;
            let std = var.sqrt();
            if std < 1e-12 {
                constant_columns.push(c);
                x_std[c] = 1.0;
            } else {
                x_std[c] = std;
            }
        }
        let y_mean = y.sum() / n;
        let y_var = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>() / n;
        let y_std = if y_var.sqrt() < 1e-12 { 1.0 } else { y_var.sqrt() };
        Self { x_mean, x_std, y_mean, y_std, constant_columns }
    }

    pub fn apply_x(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - self.x_mean[j]) / self.x_std[j])
    }

    pub fn apply_y(&self, y: &DVector<f64>) -> DVector<f64> {
        y.map(|v| (v - self.y_mean) / self.y_std)
    }

    pub fn unapply_y(&self, standardized: f64) -> f64 {
        standardized * self.y_std + self.y_mean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub seed: u64,
    pub noise: String,
    pub feature_names: Vec<String>,
    pub target_name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Raw inputs, one row per point.
    pub x: DMatrix<f64>,
    /// Raw targets.
    pub y: DVector<f64>,
    /// Statistics fitted on the training split of this dataset's pair.
    pub standardization: Standardization,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn standardized_x(&self) -> DMatrix<f64> {
        self.standardization.apply_x(&self.x)
    }

    pub fn standardized_y(&self) -> DVector<f64> {
        self.standardization.apply_y(&self.y)
    }
}

fn default_feature_names(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("x{i}")).collect()
}

/// Build a (train, test) pair sharing standardization fitted on train only.
pub fn standardized_pair(
    train_x: DMatrix<f64>,
    train_y: DVector<f64>,
    test_x: DMatrix<f64>,
    test_y: DVector<f64>,
    meta: DatasetMeta,
) -> (Dataset, Dataset) {
    let stats = Standardization::fit(&train_x, &train_y);
    let train = Dataset {
        x: train_x,
        y: train_y,
        standardization: stats.clone(),
        meta: meta.clone(),
    };
    let test = Dataset { x: test_x, y: test_y, standardization: stats, meta };
    (train, test)
}

/// Latent draw from a GP prior with SE kernel (lengthscale 1, signal 1).
fn gp_prior_draw(x: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> CliResult<DVector<f64>> {
    let params = KernelParams::isotropic(0.0, 0.0, (1e-8f64).ln());
    let scale = build_scale_matrix(&params, x).map_err(CliError::from)?;
    let l = scale.chol_lower();
    let z = DVector::from_fn(x.nrows(), |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(l * z)
}

/// GP-prior sample on a uniform grid over [-5, 5] with Student-t noise
/// (scale parameter `eta`, magnitude 0.1) on the training half; the test
/// half keeps the noise-free latent values.
pub fn gen_synth(
    eta: f64,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> CliResult<(Dataset, Dataset)> {
    if eta <= 0.0 {
        return Err(CliError::Usage(format!("eta must be positive, got {eta}")));
    }
    let n = n_train + n_test;
    if n_train < 2 || n_test == 0 {
        return Err(CliError::Usage("synth needs n_train >= 2 and n_test >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = DMatrix::from_fn(n, 1, |i, _| -5.0 + 10.0 * i as f64 / (n - 1) as f64);
    let latent = gp_prior_draw(&grid, &mut rng)?;

    let mut index: Vec<usize> = (0..n).collect();
    index.shuffle(&mut rng);
    let t_noise = StudentT::new(eta)
        .map_err(|e| CliError::Usage(format!("bad Student-t parameter {eta}: {e}")))?;

    let mut train_x = DMatrix::zeros(n_train, 1);
    let mut train_y = DVector::zeros(n_train);
    for (row, &i) in index[..n_train].iter().enumerate() {
        train_x[(row, 0)] = grid[(i, 0)];
        train_y[row] = latent[i] + 0.1 * rng.sample::<f64, _>(t_noise);
    }
    let mut test_x = DMatrix::zeros(n_test, 1);
    let mut test_y = DVector::zeros(n_test);
    for (row, &i) in index[n_train..].iter().enumerate() {
        test_x[(row, 0)] = grid[(i, 0)];
        test_y[row] = latent[i];
    }

    let meta = DatasetMeta {
        name: format!("synth(eta={eta})"),
        seed,
        noise: format!("0.1 * student_t(eta={eta}) on train; test noise-free"),
        feature_names: default_feature_names(1),
        target_name: "y".into(),
    };
    Ok(standardized_pair(train_x, train_y, test_x, test_y, meta))
}

fn neal_function(x: f64) -> f64 {
    0.3 + 0.4 * x + 0.5 * (2.7 * x).sin() + 1.1 / (1.0 + x * x)
}

/// Neal's 1-D benchmark: Gaussian noise (sd 0.1) plus 5% outliers whose
/// noise is drawn from N(0, outlier_sd²) instead. Test targets noise-free.
pub fn gen_neal_with(
    n_train: usize,
    n_test: usize,
    seed: u64,
    outlier_sd: f64,
) -> CliResult<(Dataset, Dataset)> {
    if n_train < 2 || n_test == 0 {
        return Err(CliError::Usage("neal needs n_train >= 2 and n_test >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train_x = DMatrix::from_fn(n_train, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut train_y = DVector::from_fn(n_train, |i, _| {
        neal_function(train_x[(i, 0)]) + 0.1 * rng.sample::<f64, _>(StandardNormal)
    });
    // exactly round(0.05 n) targets become outliers
    let n_outliers = (0.05 * n_train as f64).round() as usize;
    let mut index: Vec<usize> = (0..n_train).collect();
    index.shuffle(&mut rng);
    for &i in &index[..n_outliers] {
        train_y[i] =
            neal_function(train_x[(i, 0)]) + outlier_sd * rng.sample::<f64, _>(StandardNormal);
    }
    let test_x = DMatrix::from_fn(n_test, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
    let test_y = DVector::from_fn(n_test, |i, _| neal_function(test_x[(i, 0)]));

    let meta = DatasetMeta {
        name: "neal".into(),
        seed,
        noise: format!(
            "gaussian sd 0.1; {n_outliers} outliers ~ N(0, {outlier_sd}^2); test noise-free"
        ),
        feature_names: default_feature_names(1),
        target_name: "y".into(),
    };
    Ok(standardized_pair(train_x, train_y, test_x, test_y, meta))
}

pub fn gen_neal(n_train: usize, n_test: usize, seed: u64) -> CliResult<(Dataset, Dataset)> {
    gen_neal_with(n_train, n_test, seed, 3.0)
}

pub fn friedman_function(x: &[f64]) -> f64 {
    10.0 * (std::f64::consts::PI * x[0] * x[1]).sin()
        + 20.0 * (x[2] - 0.5) * (x[2] - 0.5)
        + 10.0 * x[3]
        + 5.0 * x[4]
}

/// Friedman-1: nonlinear function of 5 inputs plus 5 irrelevant inputs,
/// all uniform on [0, 1]. Gaussian noise (sd 1) on train, noise-free test.
pub fn gen_friedman(n_train: usize, n_test: usize, seed: u64) -> CliResult<(Dataset, Dataset)> {
    if n_train < 2 || n_test == 0 {
        return Err(CliError::Usage("friedman needs n_train >= 2 and n_test >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gen = |n: usize, noise_sd: f64| {
        let x = DMatrix::from_fn(n, 10, |_, _| rng.random::<f64>());
        let y = DVector::from_fn(n, |i, _| {
            let row: Vec<f64> = x.row(i).iter().cloned().collect();
            friedman_function(&row)
                + if noise_sd > 0.0 { noise_sd * rng.sample::<f64, _>(StandardNormal) } else { 0.0 }
        });
        (x, y)
    };
    let (train_x, train_y) = gen(n_train, 1.0);
    let (test_x, test_y) = gen(n_test, 0.0);

    let meta = DatasetMeta {
        name: "friedman".into(),
        seed,
        noise: "gaussian sd 1.0 on train; test noise-free".into(),
        feature_names: default_feature_names(10),
        target_name: "y".into(),
    };
    Ok(standardized_pair(train_x, train_y, test_x, test_y, meta))
}

#[derive(Debug, Clone)]
pub enum SplitSpec {
    /// Fraction of rows that go to the training split.
    Fraction(f64),
    /// Exact (train, test) counts.
    Counts(usize, usize),
}

#[derive(Debug, Clone)]
pub enum TargetSpec {
    Name(String),
    Index(usize),
}

/// Load a numeric CSV (header row required) and split it into train/test.
/// Standardization is fitted on the training split only.
pub fn load_csv(
    path: &str,
    target: &TargetSpec,
    split: &SplitSpec,
    seed: u64,
) -> CliResult<(Dataset, Dataset)> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Data(format!("cannot read {path}: {e}")))?;
    let headers: Vec<String> =
        reader.headers().map_err(|e| CliError::Data(format!("{path}: {e}")))?.iter()
            .map(|h| h.trim().to_string())
            .collect();
    let target_idx = match target {
        TargetSpec::Name(name) => headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::Data(format!("target column '{name}' not found in {path} (columns: {headers:?})"))
        })?,
        TargetSpec::Index(i) => {
            if *i >= headers.len() {
                return Err(CliError::Data(format!(
                    "target column index {i} out of range for {} columns",
                    headers.len()
                )));
            }
            *i
        }
    };

    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(format!("{path} row {}: {e}", line + 2)))?;
        let mut features = Vec::with_capacity(headers.len() - 1);
        let mut target_value = f64::NAN;
        for (col, cell) in record.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| {
                CliError::Data(format!(
                    "{path} row {} column '{}' (#{col}): non-numeric cell '{cell}'",
                    line + 2,
                    headers[col]
                ))
            })?;
            if col == target_idx {
                target_value = value;
            } else {
                features.push(value);
            }
        }
        rows.push((features, target_value));
    }
    if rows.len() < 3 {
        return Err(CliError::Data(format!("{path}: need at least 3 data rows, got {}", rows.len())));
    }

    let (n_train, n_test) = match split {
        SplitSpec::Fraction(f) => {
            if !(0.0 < *f && *f < 1.0) {
                return Err(CliError::Usage(format!("split fraction {f} outside (0, 1)")));
            }
            let n_train = ((rows.len() as f64) * f).round() as usize;
            (n_train.clamp(2, rows.len() - 1), rows.len() - n_train.clamp(2, rows.len() - 1))
        }
        SplitSpec::Counts(tr, te) => {
            if tr + te > rows.len() {
                return Err(CliError::Data(format!(
                    "split {tr}+{te} exceeds {} available rows",
                    rows.len()
                )));
            }
            (*tr, *te)
        }
    };

    let mut index: Vec<usize> = (0..rows.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    index.shuffle(&mut rng);

    let d = headers.len() - 1;
    let take = |idx: &[usize]| {
        let x = DMatrix::from_fn(idx.len(), d, |i, j| rows[idx[i]].0[j]);
        let y = DVector::from_fn(idx.len(), |i, _| rows[idx[i]].1);
        (x, y)
    };
    let (train_x, train_y) = take(&index[..n_train]);
    let (test_x, test_y) = take(&index[n_train..n_train + n_test]);

    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != target_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let meta = DatasetMeta {
        name: path.to_string(),
        seed,
        noise: "user-supplied".into(),
        feature_names,
        target_name: headers[target_idx].clone(),
    };
    Ok(standardized_pair(train_x, train_y, test_x, test_y, meta))
}

/// Write a dataset back out as CSV (raw values; exact round trip).
pub fn write_dataset_csv(ds: &Dataset, path: &str) -> CliResult<()> {
    let mut writer =
        csv::Writer::from_path(path).map_err(|e| CliError::Internal(format!("{path}: {e}")))?;
    let mut header = ds.meta.feature_names.clone();
    header.push(ds.meta.target_name.clone());
    writer.write_record(&header).map_err(|e| CliError::Internal(e.to_string()))?;
    for i in 0..ds.len() {
        let mut row: Vec<String> = (0..ds.dim()).map(|j| format!("{}", ds.x[(i, j)])).collect();
        row.push(format!("{}", ds.y[i]));
        writer.write_record(&row).map_err(|e| CliError::Internal(e.to_string()))?;
    }
    writer.flush().map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(())
}
